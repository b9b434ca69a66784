"""Multi-scale mask prediction pre-training.

Residues are masked first (together with every atom they own), then a
fraction of the remaining atoms.  Masked nodes take the ``Unknown-*`` type
ids and two MLP heads recover the original types.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tensor
from .model import GlycanModel, init_mlp, mlp_forward
from .structgraph import HeteroGlycanGraph, batch_graphs

log = logging.getLogger(__name__)

ATOM_HEAD = "pretrain.atom_head."
MONO_HEAD = "pretrain.mono_head."


class EmptyMask(ValueError):
    pass


@dataclass
class PretrainConfig:
    rho_a: float = 0.45
    rho_m: float = 0.15
    lr: float = 5e-4
    weight_decay: float = 1e-3
    batch_size: int = 256
    epochs: int = 50
    seed: int = 0
    log_wall_time: bool = False

    def __post_init__(self):
        if not (0.0 <= self.rho_a <= 1.0 and 0.0 <= self.rho_m <= 1.0):
            raise ValueError("mask ratios must lie in [0, 1]")
        if self.lr <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ValueError("lr, batch_size and epochs must be positive")


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True, eq=False)
class MaskPlan:
    masked_monos: np.ndarray
    mono_targets: np.ndarray
    masked_atoms: np.ndarray
    atom_targets: np.ndarray
    rho_a: float = 0.0
    rho_m: float = 0.0

    @property
    def empty(self) -> bool:
        return len(self.masked_monos) == 0 and len(self.masked_atoms) == 0

    @property
    def size(self) -> int:
        return len(self.masked_monos) + len(self.masked_atoms)


def sample_mask(g: HeteroGlycanGraph, rho_a: float, rho_m: float,
                rng: np.random.Generator) -> MaskPlan:
    """Residues first, uniformly without replacement; then atoms from the residual pool."""
    if not (0.0 <= rho_a <= 1.0 and 0.0 <= rho_m <= 1.0):
        raise ValueError("mask ratios must lie in [0, 1]")
    m = g.num_monos
    k_m = round_half_away(rho_m * m)
    monos = np.sort(rng.choice(m, size=k_m, replace=False)) if k_m else np.zeros(0, np.int64)
    owned = np.isin(g.atom_owner, monos)
    pool = np.flatnonzero(~owned)
    k_a = round_half_away(rho_a * len(pool))
    extra = rng.choice(pool, size=k_a, replace=False) if k_a else np.zeros(0, np.int64)
    atoms = np.sort(np.concatenate([np.flatnonzero(owned), extra]).astype(np.int64))
    return MaskPlan(
        masked_monos=monos.astype(np.int64),
        mono_targets=g.mono_types[monos],
        masked_atoms=atoms,
        atom_targets=g.atom_types[atoms],
        rho_a=rho_a,
        rho_m=rho_m,
    )


def apply_mask(g: HeteroGlycanGraph, plan: MaskPlan, mono_unknown_id: int,
               atom_unknown_id: int) -> HeteroGlycanGraph:
    atom_types = g.atom_types.copy()
    mono_types = g.mono_types.copy()
    atom_types[plan.masked_atoms] = atom_unknown_id
    mono_types[plan.masked_monos] = mono_unknown_id
    return g.with_types(atom_types=atom_types, mono_types=mono_types)


def merge_plans(plans: Sequence[MaskPlan], graphs: Sequence[HeteroGlycanGraph]) -> MaskPlan:
    """Shift per-graph plans into the index space of the batched graph."""
    a_off = m_off = 0
    monos, mt, atoms, at = [], [], [], []
    for plan, g in zip(plans, graphs):
        monos.append(plan.masked_monos + m_off)
        mt.append(plan.mono_targets)
        atoms.append(plan.masked_atoms + a_off)
        at.append(plan.atom_targets)
        a_off += g.num_atoms
        m_off += g.num_monos
    cat = lambda xs: np.concatenate(xs).astype(np.int64) if xs else np.zeros(0, np.int64)
    return MaskPlan(cat(monos), cat(mt), cat(atoms), cat(at),
                    plans[0].rho_a if plans else 0.0, plans[0].rho_m if plans else 0.0)


def init_heads(model: GlycanModel, rng: np.random.Generator) -> None:
    d = model.config.hidden_dim
    if ATOM_HEAD + "0.W" not in model.params:
        init_mlp(model.params, ATOM_HEAD, (d, d, len(model.atom_vocab)), rng)
        init_mlp(model.params, MONO_HEAD, (d, d, len(model.mono_vocab)), rng)


@dataclass
class RecoveryResult:
    loss: Tensor
    atom_correct: int
    mono_correct: int
    atom_nll: float
    mono_nll: float
    num_atoms: int
    num_monos: int


def recovery_loss(za: Tensor, zm: Tensor, plan: MaskPlan, params, atom_head: str = ATOM_HEAD,
                  mono_head: str = MONO_HEAD) -> RecoveryResult:
    """Cross-entropy summed over masked atoms and residues, divided by their total count."""
    if plan.empty:
        raise EmptyMask("mask plan selects no nodes")
    total = plan.size
    terms = []
    stats = {}
    for key, z, idx, y, head in (
        ("atom", za, plan.masked_atoms, plan.atom_targets, atom_head),
        ("mono", zm, plan.masked_monos, plan.mono_targets, mono_head),
    ):
        if len(idx) == 0:
            stats[key] = (0, 0.0)
            continue
        logits = mlp_forward(ad.index_rows(z, idx), params, head)
        ce = ad.softmax_cross_entropy(logits, y, reduction="sum")
        terms.append(ce)
        stats[key] = (int((logits.data.argmax(axis=1) == y).sum()), float(ce.data))
    loss = terms[0] if len(terms) == 1 else terms[0] + terms[1]
    loss = loss * (1.0 / total)
    return RecoveryResult(loss, stats["atom"][0], stats["mono"][0], stats["atom"][1],
                          stats["mono"][1], len(plan.masked_atoms), len(plan.masked_monos))


@dataclass
class EpochStats:
    nll: float = 0.0
    atom_nll: float = 0.0
    mono_nll: float = 0.0
    atom_correct: int = 0
    mono_correct: int = 0
    atoms: int = 0
    monos: int = 0

    def add(self, r: RecoveryResult) -> None:
        self.atom_nll += r.atom_nll
        self.mono_nll += r.mono_nll
        self.nll += r.atom_nll + r.mono_nll
        self.atom_correct += r.atom_correct
        self.mono_correct += r.mono_correct
        self.atoms += r.num_atoms
        self.monos += r.num_monos

    def record(self, epoch: int) -> dict:
        div = lambda a, b: a / b if b else float("nan")
        return {
            "epoch": epoch,
            "loss": div(self.nll, self.atoms + self.monos),
            "atom_acc": div(self.atom_correct, self.atoms),
            "mono_acc": div(self.mono_correct, self.monos),
            "atom_ppl": math.exp(div(self.atom_nll, self.atoms)) if self.atoms else float("nan"),
            "mono_ppl": math.exp(div(self.mono_nll, self.monos)) if self.monos else float("nan"),
        }


@dataclass
class PretrainResult:
    model: GlycanModel
    curves: list[dict]
    initial_atom_loss: float
    adam: AdamState
    majority: dict = field(default_factory=dict)


def majority_baselines(graphs: Sequence[HeteroGlycanGraph]) -> dict:
    """Frequency of the most common atom and residue type in ``graphs``."""
    atoms = np.concatenate([g.atom_types for g in graphs])
    monos = np.concatenate([g.mono_types for g in graphs])
    return {
        "atom": float(np.bincount(atoms).max() / len(atoms)),
        "mono": float(np.bincount(monos).max() / len(monos)),
    }


def run_pretraining(model: GlycanModel, graphs: Sequence[HeteroGlycanGraph], config: PretrainConfig,
                    out_dir=None, progress=None) -> PretrainResult:
    """Train ``model`` in place on ``graphs``.

    Each epoch shuffles the corpus and draws fresh mask plans.  When
    ``out_dir`` is given, ``metrics.jsonl`` (one record per epoch) and
    ``pretrained.ckpt`` are written there.
    """
    rng = np.random.default_rng(config.seed)
    init_heads(model, np.random.default_rng([config.seed, 1]))
    adam = AdamState(lr=config.lr, weight_decay=config.weight_decay)
    mono_unk, atom_unk = model.mono_vocab.unknown_id, model.atom_vocab.unknown_id
    curves: list[dict] = []
    initial_atom_loss = float("nan")
    log_fh = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_fh = open(out_dir / "metrics.jsonl", "w")
    try:
        for epoch in range(1, config.epochs + 1):
            start = time.perf_counter()
            order = rng.permutation(len(graphs))
            stats = EpochStats()
            for lo in range(0, len(order), config.batch_size):
                chunk = [graphs[i] for i in order[lo:lo + config.batch_size]]
                plans = [sample_mask(g, config.rho_a, config.rho_m, rng) for g in chunk]
                masked = [apply_mask(g, p, mono_unk, atom_unk) for g, p in zip(chunk, plans)]
                plan = merge_plans(plans, chunk)
                if plan.empty:
                    log.warning("epoch %d: batch at %d has an empty mask; skipped", epoch, lo)
                    continue
                model.params.zero_grad()
                za, zm, _ = model.encode(batch_graphs(masked), training=True)
                result = recovery_loss(za, zm, plan, model.params)
                if not np.isfinite(result.loss.data):
                    raise FloatingPointError(f"non-finite pre-training loss at epoch {epoch}")
                if math.isnan(initial_atom_loss) and result.num_atoms:
                    initial_atom_loss = result.atom_nll / result.num_atoms
                grads = ad.backward(result.loss, model.params)
                ad.adam_step(model.params, grads, adam)
                stats.add(result)
            rec = stats.record(epoch)
            if config.log_wall_time:
                rec["wall_s"] = time.perf_counter() - start
            curves.append(rec)
            if log_fh is not None:
                log_fh.write(json.dumps(rec) + "\n")
                log_fh.flush()
            if progress is not None:
                progress(rec)
    finally:
        if log_fh is not None:
            log_fh.close()
    model.extra = dict(model.extra, pretrain=asdict(config))
    if out_dir is not None:
        model.save(out_dir / "pretrained.ckpt", adam)
    return PretrainResult(model, curves, initial_atom_loss, adam, majority_baselines(graphs))
