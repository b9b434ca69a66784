"""Dataset ingestion, pre-training curation, splits and representation export."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .notation import GlycanSyntaxError, GlycanTree, canonicalize, parse_glycan
from .templates import TEMPLATES


class BadRatios(ValueError):
    pass


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class GlycanRecord:
    raw: str
    tree: GlycanTree | None
    error: str | None
    canonical: str | None
    components: int = 1

    @classmethod
    def from_text(cls, raw: str, components: int = 1) -> "GlycanRecord":
        try:
            tree = parse_glycan(raw)
        except GlycanSyntaxError as exc:
            return cls(raw, None, f"{type(exc).__name__}: {exc}", None, components)
        return cls(raw, tree, None, canonicalize(tree), components)

    @property
    def parsed(self) -> bool:
        return self.tree is not None

    @property
    def fully_solved(self) -> bool:
        """No ``?`` in any linkage and every residue has a known template."""
        if self.tree is None:
            return False
        return self.tree.fully_solved and all(n in TEMPLATES for n in self.tree.names)

    @property
    def single_component(self) -> bool:
        return self.components == 1


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def write_jsonl(path, rows: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def load_records(path) -> list[GlycanRecord]:
    """Read glycans from JSON-lines (``{"glycan", "components"?}``) or plain text, one per line."""
    path = Path(path)
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                doc = json.loads(line)
                records.append(GlycanRecord.from_text(doc["glycan"], int(doc.get("components", 1))))
            else:
                records.append(GlycanRecord.from_text(line))
    return records


@dataclass
class CurationReport:
    input: int = 0
    kept: int = 0
    rejected_quality: int = 0
    rejected_integrity: int = 0
    rejected_leakage: int = 0

    def as_dict(self) -> dict:
        return {
            "input": self.input,
            "kept": self.kept,
            "rejected_quality": self.rejected_quality,
            "rejected_integrity": self.rejected_integrity,
            "rejected_leakage": self.rejected_leakage,
        }


def curate(records: Sequence[GlycanRecord],
           downstream_canonical_sets: Sequence[set[str]] = ()) -> tuple[list[GlycanRecord], CurationReport]:
    """Apply quality, integrity and leakage filters in that order."""
    leaked: set[str] = set().union(*downstream_canonical_sets) if downstream_canonical_sets else set()
    report = CurationReport(input=len(records))
    kept = []
    for rec in records:
        if not rec.fully_solved:
            report.rejected_quality += 1
        elif not rec.single_component:
            report.rejected_integrity += 1
        elif rec.canonical in leaked:
            report.rejected_leakage += 1
        else:
            kept.append(rec)
    report.kept = len(kept)
    return kept, report


SPLITS = ("train", "valid", "test")


def split_sizes(n: int, ratios: Sequence[float]) -> list[int]:
    """Floor each share, then hand the remainder to the largest fractional parts (ties: earlier split)."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise BadRatios(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    raw = [r * n for r in ratios]
    sizes = [math.floor(x + 1e-9) for x in raw]
    order = sorted(range(3), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split_dataset(records: Sequence, ratios: Sequence[float], seed: int = 0) -> list[str]:
    """Split name per record; a seeded shuffle decides membership."""
    sizes = split_sizes(len(records), ratios)
    perm = np.random.default_rng(seed).permutation(len(records))
    out = [""] * len(records)
    start = 0
    for name, size in zip(SPLITS, sizes):
        for i in perm[start:start + size]:
            out[i] = name
        start += size
    return out


@dataclass
class Sample:
    glycan: str
    label: float | int
    split: str
    protein_id: str | None = None


def load_task_dataset(path) -> list[Sample]:
    out = []
    for doc in read_jsonl(path):
        split = doc.get("split", "train")
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        out.append(Sample(doc["glycan"], doc["label"], split, doc.get("protein_id")))
    return out


def load_protein_embeddings(path) -> dict[str, np.ndarray]:
    table: dict[str, np.ndarray] = {}
    width = None
    for doc in read_jsonl(path):
        vec = np.asarray(doc["vector"], dtype=np.float32)
        if width is None:
            width = len(vec)
        if len(vec) != width:
            raise ValueError(f"protein {doc['id']!r}: vector length {len(vec)} != {width}")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"protein {doc['id']!r}: non-finite values")
        table[doc["id"]] = vec
    return table


def export_representations(model, samples: Sequence[Sample], path, batch_size: int = 256) -> int:
    """Write ``{"glycan", "label", "vector"}`` rows of eval-mode ``z_g``; returns the row count."""
    glycans = [s.glycan for s in samples]
    vectors = model.embed_glycans(glycans, batch_size)
    with open(path, "w") as fh:
        for s, vec in zip(samples, vectors):
            row = {"glycan": canonicalize(parse_glycan(s.glycan)), "label": s.label,
                   "vector": [float(x) for x in vec]}
            fh.write(json.dumps(row) + "\n")
    return len(samples)
