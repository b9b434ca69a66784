"""All-atom heterogeneous glycan graphs.

A graph holds atom nodes, monosaccharide nodes and three relation-typed edge
sets:

* ``e_aa`` -- covalent bonds inside one residue, both directions, relation =
  bond type (single, double, triple, aromatic);
* ``e_am`` -- atom <-> owning residue, in the stacked index space where atoms
  occupy ``[0, N)`` and residues ``[N, N+M)``; relation 0 is atom -> residue,
  relation 1 residue -> atom (both 0 when the two are collapsed);
* ``e_mm`` -- glycosidic bonds, relation ids from :class:`LinkageVocab`
  (even = child -> parent, odd = parent -> child).

Edges are ``int64`` arrays of shape ``(E, 3)`` with columns
``(src, dst, relation)``.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .notation import GlycanTree, LinkageVocab, MonoVocab
from .templates import BOND_INDEX, BOND_TYPES, GENERIC_TEMPLATE, TEMPLATES, AtomTemplate

UNKNOWN_ATOM = "Unknown-Atom"
NUM_AA_RELATIONS = len(BOND_TYPES)


class UnknownMonosaccharide(KeyError):
    pass


class UnknownLinkage(KeyError):
    pass


@dataclass(frozen=True)
class AtomVocab:
    elements: tuple[str, ...] = ("C", "N", "O", "S", "P", UNKNOWN_ATOM)

    def __post_init__(self):
        if len(set(self.elements)) != len(self.elements):
            raise ValueError("duplicate element symbols")
        if self.elements.count(UNKNOWN_ATOM) != 1:
            raise ValueError(f"vocabulary must contain exactly one {UNKNOWN_ATOM}")

    @property
    def unknown_id(self) -> int:
        return self.elements.index(UNKNOWN_ATOM)

    def lookup(self, symbol: str) -> int:
        return self.elements.index(symbol)

    def __len__(self) -> int:
        return len(self.elements)


def template_for(mono_name: str, mode: str = "strict") -> AtomTemplate:
    if not mono_name:
        raise ValueError("empty monosaccharide name")
    if mono_name in TEMPLATES:
        return TEMPLATES[mono_name]
    if mode == "lenient":
        return GENERIC_TEMPLATE
    if mode != "strict":
        raise ValueError(f"unknown template mode {mode!r}")
    raise UnknownMonosaccharide(mono_name)


def _edges(rows) -> np.ndarray:
    return np.asarray(rows, dtype=np.int64).reshape(-1, 3)


@dataclass(frozen=True, eq=False)
class HeteroGlycanGraph:
    atom_types: np.ndarray
    mono_types: np.ndarray
    atom_owner: np.ndarray
    e_aa: np.ndarray
    e_am: np.ndarray
    e_mm: np.ndarray
    num_am_relations: int = 2
    num_mm_relations: int = 0
    relation_names: dict = field(default_factory=dict, compare=False)

    @property
    def num_atoms(self) -> int:
        return len(self.atom_types)

    @property
    def num_monos(self) -> int:
        return len(self.mono_types)

    def with_types(self, atom_types=None, mono_types=None) -> "HeteroGlycanGraph":
        return replace(
            self,
            atom_types=self.atom_types if atom_types is None else atom_types,
            mono_types=self.mono_types if mono_types is None else mono_types,
        )

    def __eq__(self, other):
        if not isinstance(other, HeteroGlycanGraph):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("atom_types", "mono_types", "atom_owner", "e_aa", "e_am", "e_mm")
        ) and (self.num_am_relations, self.num_mm_relations) == (
            other.num_am_relations, other.num_mm_relations)

    def to_json(self) -> str:
        doc = {
            "atom_types": self.atom_types.tolist(),
            "mono_types": self.mono_types.tolist(),
            "atom_owner": self.atom_owner.tolist(),
            "e_aa": self.e_aa.tolist(),
            "e_am": self.e_am.tolist(),
            "e_mm": self.e_mm.tolist(),
            "relations": self.relation_names,
        }
        return json.dumps(doc, sort_keys=True)


def assemble(
    tree: GlycanTree,
    vocabs: tuple[MonoVocab, LinkageVocab, AtomVocab],
    mode: str = "strict",
    collapse_am_relations: bool = False,
) -> HeteroGlycanGraph:
    """Expand every residue of ``tree`` into its template and wire the graph.

    In lenient mode, names missing from the template table use the generic
    hexose template, names missing from ``MonoVocab`` take the mask id, and
    linkages missing from ``LinkageVocab`` fall back to ``??-?`` when present.
    """
    mono_vocab, link_vocab, atom_vocab = vocabs
    atom_types: list[int] = []
    owner: list[int] = []
    e_aa: list[tuple[int, int, int]] = []
    mono_types: list[int] = []
    for m, name in tree.nodes:
        if name in mono_vocab:
            mono_types.append(mono_vocab.lookup(name))
        elif mode == "lenient":
            mono_types.append(mono_vocab.unknown_id)
        else:
            raise UnknownMonosaccharide(name)
        tpl = template_for(name, mode)
        base = len(atom_types)
        atom_types.extend(atom_vocab.lookup(el) for el in tpl.atoms)
        owner.extend([m] * len(tpl))
        for i, j, kind in tpl.bonds:
            r = BOND_INDEX[kind]
            e_aa.append((base + i, base + j, r))
            e_aa.append((base + j, base + i, r))

    n_atoms = len(atom_types)
    up, down = (0, 0) if collapse_am_relations else (0, 1)
    e_am = []
    for a, m in enumerate(owner):
        e_am.append((a, n_atoms + m, up))
    for a, m in enumerate(owner):
        e_am.append((n_atoms + m, a, down))

    e_mm = []
    for child, parent, link in tree.edges:
        if link not in link_vocab:
            if mode == "lenient" and "??-?" in link_vocab:
                link = "??-?"
            else:
                raise UnknownLinkage(link)
        fwd, rev = link_vocab.relation_ids(link)
        e_mm.append((child, parent, fwd))
        e_mm.append((parent, child, rev))

    relation_names = {
        "aa": list(BOND_TYPES),
        "am": ["atom-mono"] if collapse_am_relations else ["atom->mono", "mono->atom"],
        "mm": [link_vocab.relation_name(r) for r in range(link_vocab.num_relations)],
    }
    return HeteroGlycanGraph(
        atom_types=np.asarray(atom_types, dtype=np.int64),
        mono_types=np.asarray(mono_types, dtype=np.int64),
        atom_owner=np.asarray(owner, dtype=np.int64),
        e_aa=_edges(e_aa),
        e_am=_edges(e_am),
        e_mm=_edges(e_mm),
        num_am_relations=1 if collapse_am_relations else 2,
        num_mm_relations=link_vocab.num_relations,
        relation_names=relation_names,
    )


@dataclass(frozen=True)
class GraphStats:
    num_atoms: int
    num_monos: int
    aa: dict[int, int]
    am: dict[int, int]
    mm: dict[int, int]

    def as_dict(self) -> dict:
        return {
            "N": self.num_atoms,
            "M": self.num_monos,
            "edges": {
                "aa": {str(k): v for k, v in sorted(self.aa.items())},
                "am": {str(k): v for k, v in sorted(self.am.items())},
                "mm": {str(k): v for k, v in sorted(self.mm.items())},
            },
        }


def graph_stats(g: HeteroGlycanGraph) -> GraphStats:
    def count(edges: np.ndarray, num_rel: int) -> dict[int, int]:
        c = Counter(edges[:, 2].tolist())
        return {r: c.get(r, 0) for r in range(num_rel)}

    return GraphStats(
        num_atoms=g.num_atoms,
        num_monos=g.num_monos,
        aa=count(g.e_aa, NUM_AA_RELATIONS),
        am=count(g.e_am, g.num_am_relations),
        mm=count(g.e_mm, g.num_mm_relations),
    )


@dataclass(frozen=True, eq=False)
class GraphBatch:
    """Disjoint union of several graphs with per-node graph ids."""

    graph: HeteroGlycanGraph
    atom_graph: np.ndarray
    mono_graph: np.ndarray
    num_graphs: int


def batch_graphs(graphs: Sequence[HeteroGlycanGraph]) -> GraphBatch:
    if not graphs:
        raise ValueError("cannot batch zero graphs")
    n_total = sum(g.num_atoms for g in graphs)
    a_off = m_off = 0
    aa, am, mm, owner, atom_graph, mono_graph = [], [], [], [], [], []
    for gi, g in enumerate(graphs):
        n, m = g.num_atoms, g.num_monos
        aa.append(g.e_aa + [a_off, a_off, 0])
        # remap stacked indices: atoms -> a_off + i, residues -> n_total + m_off + j
        src, dst = g.e_am[:, 0], g.e_am[:, 1]
        src = np.where(src < n, src + a_off, src - n + n_total + m_off)
        dst = np.where(dst < n, dst + a_off, dst - n + n_total + m_off)
        am.append(np.stack([src, dst, g.e_am[:, 2]], axis=1))
        mm.append(g.e_mm + [m_off, m_off, 0])
        owner.append(g.atom_owner + m_off)
        atom_graph.append(np.full(n, gi, dtype=np.int64))
        mono_graph.append(np.full(m, gi, dtype=np.int64))
        a_off += n
        m_off += m
    first = graphs[0]
    merged = HeteroGlycanGraph(
        atom_types=np.concatenate([g.atom_types for g in graphs]),
        mono_types=np.concatenate([g.mono_types for g in graphs]),
        atom_owner=np.concatenate(owner),
        e_aa=np.concatenate(aa).astype(np.int64).reshape(-1, 3),
        e_am=np.concatenate(am).astype(np.int64).reshape(-1, 3),
        e_mm=np.concatenate(mm).astype(np.int64).reshape(-1, 3),
        num_am_relations=first.num_am_relations,
        num_mm_relations=first.num_mm_relations,
        relation_names=first.relation_names,
    )
    return GraphBatch(merged, np.concatenate(atom_graph), np.concatenate(mono_graph), len(graphs))
