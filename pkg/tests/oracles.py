"""Naive reference implementations used as test oracles.

None of these import the code under test beyond plain data containers.
"""
from __future__ import annotations

import math
import random

import numpy as np

ANOMERS = "ab?"
DONORS = "12?"
ACCEPTORS = "123456789?"
NAMES = ["Glc", "Gal", "Man", "Fuc", "Xyl", "GlcNAc", "GalNAc", "Neu5Ac", "Neu5Gc", "Kdn", "GlcA", "Rha"]

# Hand-written strings: chains, branches up to depth 3, unknown linkages, sialic acids.
HAND_WRITTEN = [
    "Glc",
    "GlcNAc",
    "Neu5Ac",
    "Gal(b1-4)Glc",
    "Gal(b1-3)GalNAc",
    "Neu5Ac(a2-3)Gal(b1-4)Glc",
    "Neu5Ac(a2-6)Gal(b1-4)GlcNAc",
    "Neu5Gc(a2-3)Gal(b1-4)GlcNAc",
    "Kdn(a2-8)Neu5Ac(a2-3)Gal",
    "Fuc(a1-2)Gal(b1-4)GlcNAc",
    "Gal(b1-4)[Fuc(a1-3)]GlcNAc",
    "Man(a1-3)[Man(a1-6)]Man",
    "Man(a1-6)[Man(a1-3)]Man",
    "Man(a1-2)Man(a1-3)[Man(a1-6)]Man",
    "Man(a1-3)[Man(a1-6)]Man(b1-4)GlcNAc(b1-4)GlcNAc",
    "Man(a1-2)Man(a1-2)Man(a1-3)[Man(a1-3)[Man(a1-6)]Man(a1-6)]Man(b1-4)GlcNAc(b1-4)GlcNAc",
    "Man(a1-2)Man(a1-3)[Man(a1-2)Man(a1-6)]Man(b1-4)GlcNAc",
    "GlcNAc(b1-2)Man(a1-3)[GlcNAc(b1-2)Man(a1-6)]Man(b1-4)GlcNAc(b1-4)GlcNAc",
    "GlcNAc(b1-2)Man(a1-3)[GlcNAc(b1-2)Man(a1-6)]Man(b1-4)GlcNAc(b1-4)[Fuc(a1-6)]GlcNAc",
    "Gal(b1-4)GlcNAc(b1-2)Man(a1-3)[Gal(b1-4)GlcNAc(b1-2)Man(a1-6)]Man(b1-4)GlcNAc(b1-4)GlcNAc",
    "Neu5Ac(a2-6)Gal(b1-4)GlcNAc(b1-2)Man(a1-3)[Neu5Ac(a2-6)Gal(b1-4)GlcNAc(b1-2)Man(a1-6)]Man(b1-4)GlcNAc",
    "Gal(b1-4)GlcNAc(b1-2)[Gal(b1-4)GlcNAc(b1-4)]Man(a1-3)[Man(a1-6)]Man",
    "Gal(b1-3)[GlcNAc(b1-6)]GalNAc",
    "Gal(b1-3)[Neu5Ac(a2-6)]GalNAc",
    "Neu5Ac(a2-3)Gal(b1-3)[Neu5Ac(a2-6)]GalNAc",
    "Gal(b1-4)GlcNAc(b1-6)[Gal(b1-3)]GalNAc",
    "GlcNAc(b1-3)GalNAc",
    "Fuc(a1-2)[GalNAc(a1-3)]Gal(b1-4)Glc",
    "Fuc(a1-2)[Gal(a1-3)]Gal(b1-3)GlcNAc",
    "Gal(b1-3)[Fuc(a1-4)]GlcNAc(b1-3)Gal(b1-4)Glc",
    "Gal(?1-?)Glc",
    "Gal(b1-?)GlcNAc",
    "Man(?1-3)[Man(?1-6)]Man",
    "Neu5Ac(a2-?)Gal(b1-4)GlcNAc",
    "Fuc(a1-?)[Gal(b1-4)]GlcNAc",
    "Glc(a1-4)Glc(a1-4)Glc(a1-4)Glc",
    "Glc(b1-3)[Glc(b1-6)]Glc(b1-3)Glc",
    "Xyl(b1-2)[Man(a1-3)][Man(a1-6)]Man(b1-4)GlcNAc",
    "Glc(b1-3)[Gal(b1-4)[Fuc(a1-2)[GalNAc(a1-3)]Gal(b1-3)]GlcNAc(b1-6)]Gal",
    "Man(a1-2)Man(a1-3)[Man(a1-2)[Man(a1-3)[Glc(a1-2)]Man(a1-6)]Man(a1-6)]Man(b1-4)GlcNAc",
    "GlcA(b1-3)GalNAc(b1-4)GlcA(b1-3)GalNAc",
    "GlcA(b1-3)Gal(b1-3)Gal(b1-4)Xyl",
    "Kdn(a2-3)Gal",
    "Neu5Gc(a2-8)Neu5Gc",
    "Neu5Ac(a2-8)Neu5Ac(a2-8)Neu5Ac(a2-3)Gal(b1-4)Glc",
    "Gal(a1-3)[Fuc(a1-2)]Gal(b1-4)[Fuc(a1-3)]GlcNAc",
    "GalNAc(b1-4)[Neu5Ac(a2-3)]Gal(b1-4)Glc",
    "Gal(b1-3)GalNAc(b1-4)[Neu5Ac(a2-8)Neu5Ac(a2-3)]Gal(b1-4)Glc",
    "Man(a1-2)Man(a1-6)[Man(a1-3)]Man(a1-6)[Man(a1-2)Man(a1-3)]Man(b1-4)GlcNAc(b1-4)GlcNAc",
    "Fuc(a1-2)Gal(b1-3)[Fuc(a1-4)]GlcNAc(b1-3)[Gal(b1-4)[Fuc(a1-3)]GlcNAc(b1-6)]Gal(b1-4)Glc",
]


def tree_signature(nodes, edges, root):
    """Order-free structural signature of a rooted labelled tree."""
    names = dict(nodes)
    kids: dict[int, list] = {nid: [] for nid in names}
    for child, parent, link in edges:
        kids[parent].append((child, link))

    def sig(n):
        return (names[n], tuple(sorted((link, sig(c)) for c, link in kids[n])))

    return sig(root)


def signature_of(tree):
    return tree_signature(tree.nodes, tree.edges, tree.root_id)


def depth_of(text: str) -> int:
    depth = best = 0
    for ch in text:
        depth += ch == "["
        depth -= ch == "]"
        best = max(best, depth)
    return best


def random_link(rnd: random.Random) -> str:
    return rnd.choice(ANOMERS) + rnd.choice(DONORS) + "-" + rnd.choice(ACCEPTORS)


def random_tree(rnd: random.Random, max_nodes: int = 12, names=NAMES):
    """(nodes, edges, root) with node 0 as root and random parents."""
    m = rnd.randint(1, max_nodes)
    nodes = [(i, rnd.choice(names)) for i in range(m)]
    edges = [(i, rnd.randrange(i), random_link(rnd)) for i in range(1, m)]
    return nodes, edges, 0


def render(nodes, edges, root, rnd: random.Random | None = None) -> str:
    """IUPAC-condensed text with an arbitrary (optionally random) main-chain choice."""
    names = dict(nodes)
    kids: dict[int, list] = {nid: [] for nid in names}
    for child, parent, link in edges:
        kids[parent].append((child, link))

    def text(n):
        ch = list(kids[n])
        if rnd is not None:
            rnd.shuffle(ch)
        if not ch:
            return names[n]
        (main, mlink), rest = ch[0], ch[1:]
        out = text(main) + f"({mlink})"
        for c, link in rest:
            out += "[" + text(c) + f"({link})]"
        return out + names[n]

    return text(root)


# ---------------------------------------------------------------------------
# numerics

def naive_bn_eval(x, gamma, beta, mean, var, eps=1e-5):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            out[i, j] = gamma[j] * (x[i, j] - mean[j]) / math.sqrt(var[j] + eps) + beta[j]
    return out


def naive_rgconv(z, edges, w_self, w_rel, gamma, beta, mean, var, eps=1e-5):
    """Per-node, per-relation loops over in-edges (src, dst, rel)."""
    n, d = z.shape
    msg = np.zeros((n, d))
    for i in range(n):
        for r, w in w_rel.items():
            nbrs = [int(s) for s, t, rel in edges if t == i and rel == r]
            if not nbrs:
                continue
            acc = np.zeros(d)
            for j in nbrs:
                for a in range(d):
                    for b in range(d):
                        acc[a] += w[a, b] * z[j, b]
            msg[i] += acc / len(nbrs)
    normed = naive_bn_eval(msg, gamma, beta, mean, var, eps)
    out = np.zeros((n, d))
    for i in range(n):
        for a in range(d):
            s = sum(w_self[a, b] * z[i, b] for b in range(d))
            out[i, a] = s + max(normed[i, a], 0.0)
    return out


def naive_macro_f1(pred, true, k):
    scores = []
    for c in range(k):
        tp = sum(1 for p, t in zip(pred, true) if p == c and t == c)
        fp = sum(1 for p, t in zip(pred, true) if p == c and t != c)
        fn = sum(1 for p, t in zip(pred, true) if p != c and t == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return sum(scores) / k


def naive_auprc(scores, labels):
    """Sum over distinct thresholds (high to low) of recall gain times precision."""
    n_pos = sum(labels)
    total, prev_recall = 0.0, 0.0
    for thr in sorted(set(scores), reverse=True):
        sel = [y for s, y in zip(scores, labels) if s >= thr]
        tp = sum(sel)
        recall = tp / n_pos
        total += (recall - prev_recall) * (tp / len(sel))
        prev_recall = recall
    return total


ILLEGAL = "#!@ ,;{}<>*+=/\\|\t"


def malformed(rnd: random.Random, valid: str) -> str:
    """A string that is invalid by construction, derived from ``valid``."""
    kind = rnd.randrange(8)
    opens = [i for i, ch in enumerate(valid) if ch == "("]
    brackets = [i for i, ch in enumerate(valid) if ch in "[]"]
    if kind == 0 and opens:
        i = rnd.choice(opens)
        return valid[:i + rnd.randint(1, 5)]
    if kind == 1:
        i = rnd.randrange(len(valid) + 1)
        return valid[:i] + rnd.choice(ILLEGAL) + valid[i:]
    if kind == 2 and brackets:
        i = rnd.choice(brackets)
        return valid[:i] + valid[i + 1:]
    if kind == 2:
        return valid + "]"
    if kind == 3:
        return valid + f"({random_link(rnd)})"
    if kind == 4:
        return f"({random_link(rnd)})" + valid
    if kind == 5 and opens:
        i = rnd.choice(opens)
        return valid[:i + 1] + rnd.choice("xyzc0") + valid[i + 2:]
    if kind == 6:
        return rnd.choice(["", " ", "[]", "()", "[", "]"])
    return "[]" + valid


# curation fixture: 6 clean, 2 unparseable, 1 multi-component, 1 leaked
CURATION_RECORDS = [
    {"glycan": "Gal(b1-4)Glc"},
    {"glycan": "Man(a1-3)[Man(a1-6)]Man"},
    {"glycan": "Neu5Ac(a2-3)Gal(b1-4)GlcNAc"},
    {"glycan": "Fuc(a1-2)Gal(b1-3)GalNAc"},
    {"glycan": "Glc(a1-4)Glc(a1-4)Glc"},
    {"glycan": "GlcNAc(b1-4)GlcNAc"},
    {"glycan": "Gal(b1-4"},
    {"glycan": "Man(a1-3)]Man"},
    {"glycan": "Gal(b1-3)GlcNAc", "components": 2},
    {"glycan": "Man(a1-6)[Man(a1-3)]Man(b1-4)GlcNAc"},
]
CURATION_DOWNSTREAM = ["Man(a1-3)[Man(a1-6)]Man(b1-4)GlcNAc", "Xyl(b1-2)Man"]
CURATION_EXPECTED = {"input": 10, "kept": 6, "rejected_quality": 2, "rejected_integrity": 1,
                     "rejected_leakage": 1}
