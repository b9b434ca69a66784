"""Rule-based generators for desk-scale glycan corpora.

Structures follow four biosynthetic families so that residue identity is
partly predictable from context and family labels are learnable:

0. complex N-glycans (GlcNAc/Gal/Neu5Ac antennae on the trimannosyl core)
1. high-mannose N-glycans
2. mucin-type O-glycans (core 1 / core 2 on GalNAc)
3. glycolipid-type chains on a lactose core
"""
from __future__ import annotations

import numpy as np

from .notation import GlycanTree, canonicalize

FAMILIES = ("complex_n", "high_mannose", "o_glycan", "glycolipid")


class _Builder:
    def __init__(self, root: str):
        self.names = [root]
        self.edges: list[tuple[int, int, str]] = []

    def add(self, name: str, parent: int, link: str) -> int:
        self.names.append(name)
        self.edges.append((len(self.names) - 1, parent, link))
        return len(self.names) - 1

    def tree(self) -> GlycanTree:
        return GlycanTree(tuple(enumerate(self.names)), tuple(self.edges), 0)


def _core(b: _Builder) -> tuple[int, int, int]:
    glcnac2 = b.add("GlcNAc", 0, "b1-4")
    man = b.add("Man", glcnac2, "b1-4")
    arm3 = b.add("Man", man, "a1-3")
    arm6 = b.add("Man", man, "a1-6")
    return man, arm3, arm6


def _complex_n(rng: np.random.Generator) -> GlycanTree:
    b = _Builder("GlcNAc")
    man, arm3, arm6 = _core(b)
    if rng.random() < 0.5:
        b.add("Fuc", 0, "a1-6")
    if rng.random() < 0.3:
        b.add("GlcNAc", man, "b1-4")
    for arm in (arm3, arm6):
        if rng.random() < 0.15:
            continue
        gn = b.add("GlcNAc", arm, "b1-2")
        if rng.random() < 0.75:
            gal = b.add("Gal", gn, "b1-4")
            r = rng.random()
            if r < 0.35:
                b.add("Neu5Ac", gal, "a2-6")
            elif r < 0.6:
                b.add("Neu5Ac", gal, "a2-3")
            elif r < 0.7:
                b.add("Neu5Gc", gal, "a2-3")
            if rng.random() < 0.2:
                b.add("Fuc", gn, "a1-3")
    return b.tree()


def _high_mannose(rng: np.random.Generator) -> GlycanTree:
    b = _Builder("GlcNAc")
    _, arm3, arm6 = _core(b)
    if rng.random() < 0.2:
        b.add("Xyl", 2, "b1-2")
    tips = [arm3]
    m3 = b.add("Man", arm6, "a1-3")
    m6 = b.add("Man", arm6, "a1-6")
    tips += [m3, m6]
    for tip in tips:
        depth = rng.integers(0, 3)
        node = tip
        for _ in range(depth):
            node = b.add("Man", node, "a1-2")
    if rng.random() < 0.3:
        b.add("Glc", tips[0], "a1-3")
    return b.tree()


def _o_glycan(rng: np.random.Generator) -> GlycanTree:
    b = _Builder("GalNAc")
    gal = b.add("Gal", 0, "b1-3")
    if rng.random() < 0.5:
        gn = b.add("GlcNAc", 0, "b1-6")
        if rng.random() < 0.6:
            gal2 = b.add("Gal", gn, "b1-4")
            if rng.random() < 0.4:
                b.add("Fuc", gal2, "a1-2")
    elif rng.random() < 0.5:
        b.add("Neu5Ac", 0, "a2-6")
    r = rng.random()
    if r < 0.4:
        b.add("Neu5Ac", gal, "a2-3")
    elif r < 0.6:
        b.add("Fuc", gal, "a1-2")
    elif r < 0.7:
        b.add("Kdn", gal, "a2-3")
    return b.tree()


def _glycolipid(rng: np.random.Generator) -> GlycanTree:
    b = _Builder("Glc")
    gal = b.add("Gal", 0, "b1-4")
    r = rng.random()
    if r < 0.4:
        gn = b.add("GlcNAc", gal, "b1-3")
        node = b.add("Gal", gn, "b1-4")
        for _ in range(rng.integers(0, 2)):
            gn = b.add("GlcNAc", node, "b1-3")
            node = b.add("Gal", gn, "b1-4")
        if rng.random() < 0.5:
            b.add("Neu5Ac", node, "a2-3")
    elif r < 0.75:
        sia = b.add("Neu5Ac", gal, "a2-3")
        if rng.random() < 0.5:
            b.add("Neu5Ac", sia, "a2-8")
        if rng.random() < 0.6:
            gnac = b.add("GalNAc", gal, "b1-4")
            if rng.random() < 0.5:
                b.add("Gal", gnac, "b1-3")
    else:
        gnac = b.add("GalNAc", gal, "b1-3")
        if rng.random() < 0.5:
            b.add("Gal", gnac, "a1-3")
        if rng.random() < 0.3:
            b.add("Fuc", gal, "a1-2")
    return b.tree()


_GENERATORS = (_complex_n, _high_mannose, _o_glycan, _glycolipid)


def random_glycan(rng: np.random.Generator, family: int | None = None) -> tuple[str, int]:
    """Canonical string and family index of one random structure."""
    if family is None:
        family = int(rng.integers(len(_GENERATORS)))
    return canonicalize(_GENERATORS[family](rng)), family


def generate_corpus(n: int, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    return [random_glycan(rng)[0] for _ in range(n)]


def generate_taxonomy_dataset(n: int = 64, seed: int = 0,
                              splits: tuple[float, float, float] = (0.5, 0.25, 0.25)) -> list[dict]:
    """Class-balanced records ``{"glycan", "label", "split"}`` with label = family."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        glycan, fam = random_glycan(rng, family=i % len(_GENERATORS))
        records.append({"glycan": glycan, "label": fam})
    from .datakit import split_dataset

    assignment = split_dataset(records, splits, seed)
    for rec, split in zip(records, assignment):
        rec["split"] = split
    return records


def random_protein_embeddings(ids, dim: int = 32, seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {pid: rng.standard_normal(dim).astype(np.float32) for pid in ids}
