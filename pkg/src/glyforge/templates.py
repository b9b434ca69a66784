"""Heavy-atom templates for common monosaccharides.

Each template is a hand-written adjacency list over named heavy atoms.  Ring
forms are pyranoses (sialic acids use their C2-C6 pyranose ring), hydroxyl
oxygens are kept at every position including the anomeric one, and no
atoms are removed at glycosidic junctions.  Stereochemistry is not encoded,
so epimers such as Glc/Gal/Man share one skeleton.
"""
from __future__ import annotations

from dataclasses import dataclass

BOND_TYPES = ("single", "double", "triple", "aromatic")
BOND_INDEX = {name: i for i, name in enumerate(BOND_TYPES)}


@dataclass(frozen=True)
class AtomTemplate:
    atoms: tuple[str, ...]
    bonds: tuple[tuple[int, int, str], ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.atoms)
        seen = set()
        for i, j, kind in self.bonds:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"bad bond ({i}, {j})")
            if kind not in BOND_INDEX:
                raise ValueError(f"unknown bond type {kind!r}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate bond {key}")
            seen.add(key)
        if "H" in self.atoms:
            raise ValueError("templates hold heavy atoms only")
        # connectivity
        adj: dict[int, list[int]] = {i: [] for i in range(n)}
        for i, j, _ in self.bonds:
            adj[i].append(j)
            adj[j].append(i)
        reach, todo = {0}, [0]
        while todo:
            for k in adj[todo.pop()]:
                if k not in reach:
                    reach.add(k)
                    todo.append(k)
        if len(reach) != n:
            raise ValueError("template bond graph is disconnected")

    def __len__(self) -> int:
        return len(self.atoms)


def _build(spec: list[tuple[str, str]], bonds: str) -> AtomTemplate:
    """``spec`` lists (label, element); ``bonds`` is 'A-B A=B ...'."""
    labels = [lab for lab, _ in spec]
    index = {lab: i for i, lab in enumerate(labels)}
    out = []
    for item in bonds.split():
        kind = "double" if "=" in item else "single"
        a, b = item.replace("=", "-").split("-")
        out.append((index[a], index[b], kind))
    return AtomTemplate(tuple(el for _, el in spec), tuple(out), tuple(labels))


def _atoms(labels: str) -> list[tuple[str, str]]:
    return [(lab, lab[0]) for lab in labels.split()]


_RING6 = "C1-C2 C2-C3 C3-C4 C4-C5 C5-O5 O5-C1"

_HEXOSE = _build(
    _atoms("C1 C2 C3 C4 C5 C6 O1 O2 O3 O4 O5 O6"),
    f"{_RING6} C5-C6 C1-O1 C2-O2 C3-O3 C4-O4 C6-O6",
)
_DEOXYHEXOSE = _build(
    _atoms("C1 C2 C3 C4 C5 C6 O1 O2 O3 O4 O5"),
    f"{_RING6} C5-C6 C1-O1 C2-O2 C3-O3 C4-O4",
)
_PENTOSE = _build(
    _atoms("C1 C2 C3 C4 C5 O1 O2 O3 O4 O5"),
    f"{_RING6} C1-O1 C2-O2 C3-O3 C4-O4",
)
_HEXNAC = _build(
    _atoms("C1 C2 C3 C4 C5 C6 C7 C8 N2 O1 O3 O4 O5 O6 O7"),
    f"{_RING6} C5-C6 C1-O1 C2-N2 C3-O3 C4-O4 C6-O6 N2-C7 C7=O7 C7-C8",
)
_HEXN = _build(
    _atoms("C1 C2 C3 C4 C5 C6 N2 O1 O3 O4 O5 O6"),
    f"{_RING6} C5-C6 C1-O1 C2-N2 C3-O3 C4-O4 C6-O6",
)
_HEXA = _build(
    _atoms("C1 C2 C3 C4 C5 C6 O1 O2 O3 O4 O5 O6A O6B"),
    f"{_RING6} C5-C6 C1-O1 C2-O2 C3-O3 C4-O4 C6=O6A C6-O6B",
)
_SIALIC_CORE = (
    "C1=O1A C1-O1B C1-C2 C2-O2 C2-C3 C3-C4 C4-O4 C4-C5 C5-C6 C6-O6 O6-C2 "
    "C6-C7 C7-O7 C7-C8 C8-O8 C8-C9 C9-O9"
)
_NEU5AC = _build(
    _atoms("C1 C2 C3 C4 C5 C6 C7 C8 C9 C10 C11 N5 O1A O1B O2 O4 O6 O7 O8 O9 O10"),
    f"{_SIALIC_CORE} C5-N5 N5-C10 C10=O10 C10-C11",
)
_NEU5GC = _build(
    _atoms("C1 C2 C3 C4 C5 C6 C7 C8 C9 C10 C11 N5 O1A O1B O2 O4 O6 O7 O8 O9 O10 O11"),
    f"{_SIALIC_CORE} C5-N5 N5-C10 C10=O10 C10-C11 C11-O11",
)
_KDN = _build(
    _atoms("C1 C2 C3 C4 C5 C6 C7 C8 C9 O1A O1B O2 O4 O5 O6 O7 O8 O9"),
    f"{_SIALIC_CORE} C5-O5",
)

TEMPLATES: dict[str, AtomTemplate] = {
    "Glc": _HEXOSE, "Gal": _HEXOSE, "Man": _HEXOSE,
    "All": _HEXOSE, "Alt": _HEXOSE, "Gul": _HEXOSE, "Ido": _HEXOSE, "Tal": _HEXOSE,
    "Fuc": _DEOXYHEXOSE, "Rha": _DEOXYHEXOSE, "Qui": _DEOXYHEXOSE,
    "Xyl": _PENTOSE, "Ara": _PENTOSE, "Lyx": _PENTOSE, "Rib": _PENTOSE,
    "GlcNAc": _HEXNAC, "GalNAc": _HEXNAC, "ManNAc": _HEXNAC,
    "GlcN": _HEXN, "GalN": _HEXN, "ManN": _HEXN,
    "GlcA": _HEXA, "GalA": _HEXA, "IdoA": _HEXA, "ManA": _HEXA,
    "Neu5Ac": _NEU5AC, "Neu5Gc": _NEU5GC, "Kdn": _KDN,
}

GENERIC_TEMPLATE = _HEXOSE
