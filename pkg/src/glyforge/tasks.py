"""Downstream heads, fine-tuning and evaluation."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Parameters, Tensor
from .datakit import Sample
from .metrics import EmptyInput, auprc, macro_f1, spearman_rho
from .model import GlycanModel, init_mlp, mlp_forward

log = logging.getLogger(__name__)

HEAD = "head."
KINDS = ("multiclass", "binary", "regression-interaction")
_DEFAULT_METRIC = {"multiclass": "macro_f1", "binary": "auprc", "regression-interaction": "spearman"}


@dataclass
class TaskSpec:
    kind: str = "multiclass"
    num_classes: int = 2
    metric: str | None = None
    epochs: int | None = None
    batch_size: int | None = None
    lr: float = 5e-4
    weight_decay: float = 1e-3
    encoder_lr_ratio: float = 0.1
    protein_dim: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"task kind must be one of {KINDS}")
        interaction = self.kind == "regression-interaction"
        if self.metric is None:
            self.metric = _DEFAULT_METRIC[self.kind]
        if self.epochs is None:
            self.epochs = 10 if interaction else 50
        if self.batch_size is None:
            self.batch_size = 32 if interaction else 256
        if self.kind == "binary":
            self.num_classes = 2
        allowed = {"multiclass": {"macro_f1"}, "binary": {"auprc", "macro_f1"},
                   "regression-interaction": {"spearman"}}[self.kind]
        if self.metric not in allowed:
            raise ValueError(f"metric {self.metric!r} does not fit task kind {self.kind!r}")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if not interaction and self.num_classes < 2:
            raise ValueError("classification needs at least two classes")

    @property
    def out_dim(self) -> int:
        return 1 if self.kind == "regression-interaction" else self.num_classes


def init_head(params: Parameters, task: TaskSpec, hidden_dim: int, rng: np.random.Generator) -> None:
    in_dim = 2 * hidden_dim + (task.protein_dim if task.kind == "regression-interaction" else 0)
    init_mlp(params, HEAD, (in_dim, 2 * hidden_dim, task.out_dim), rng)


def head_forward(zg: Tensor, params: Parameters, protein_vecs: np.ndarray | None = None) -> Tensor:
    """Class logits, or one score per row when protein vectors are concatenated in."""
    x = zg
    if protein_vecs is not None:
        x = ad.concat([zg, Tensor(np.asarray(protein_vecs, dtype=zg.dtype))], axis=1)
    expected = params[HEAD + "0.W"].shape[0]
    if x.shape[1] != expected:
        raise ad.ShapeMismatch(f"head expects width {expected}, got {x.shape[1]}")
    return mlp_forward(x, params, HEAD)


def score_metric(task: TaskSpec, outputs: np.ndarray, labels: np.ndarray) -> float:
    if task.kind == "regression-interaction":
        return spearman_rho(outputs.reshape(-1), labels)
    if task.metric == "auprc":
        probs = np.exp(ad.ops.log_softmax_np(outputs.astype(np.float64)))
        return auprc(probs[:, 1], labels)
    return macro_f1(outputs.argmax(axis=1), labels.astype(np.int64), task.num_classes)


def select_best_epoch(values: Sequence[float]) -> int:
    """1-based epoch of the best validation value (earliest on ties)."""
    arr = np.asarray(values, dtype=np.float64)
    arr = np.where(np.isnan(arr), -np.inf, arr)
    return int(np.argmax(arr)) + 1


def _protein_matrix(samples: Sequence[Sample], proteins: dict[str, np.ndarray] | None):
    if proteins is None:
        raise ValueError("interaction tasks need protein embeddings")
    missing = [s.protein_id for s in samples if s.protein_id not in proteins]
    if missing:
        raise KeyError(f"protein embeddings missing for ids {sorted(set(map(str, missing)))[:5]}")
    return np.stack([proteins[s.protein_id] for s in samples])


def forward_samples(model: GlycanModel, samples: Sequence[Sample], task: TaskSpec,
                    proteins=None, training: bool = False) -> Tensor:
    _, _, zg = model.encode(model.batch([s.glycan for s in samples]), training=training)
    pv = _protein_matrix(samples, proteins) if task.kind == "regression-interaction" else None
    return head_forward(zg, model.params, pv)


def task_loss(outputs: Tensor, samples: Sequence[Sample], task: TaskSpec) -> Tensor:
    if task.kind == "regression-interaction":
        return ad.mse_loss(outputs, [float(s.label) for s in samples])
    return ad.softmax_cross_entropy(outputs, [int(s.label) for s in samples])


def predict(model: GlycanModel, samples: Sequence[Sample], task: TaskSpec, proteins=None,
            batch_size: int = 256) -> np.ndarray:
    if not samples:
        raise EmptyInput("no samples to evaluate")
    out = [forward_samples(model, samples[i:i + batch_size], task, proteins).data
           for i in range(0, len(samples), batch_size)]
    return np.concatenate(out)


def evaluate(model: GlycanModel, samples: Sequence[Sample], task: TaskSpec, proteins=None,
             predictions_path=None) -> tuple[float, np.ndarray]:
    """Eval-mode metric over ``samples``; optionally writes one JSON line per sample."""
    outputs = predict(model, samples, task, proteins)
    labels = np.asarray([s.label for s in samples])
    value = score_metric(task, outputs, labels)
    if predictions_path is not None:
        with open(predictions_path, "w") as fh:
            for i, (s, o) in enumerate(zip(samples, outputs)):
                row = {"index": i, "glycan": s.glycan, "label": s.label}
                if task.kind == "regression-interaction":
                    row["score"] = float(o[0])
                    row["protein_id"] = s.protein_id
                else:
                    row["pred"] = int(np.argmax(o))
                    row["logits"] = [float(v) for v in o]
                fh.write(json.dumps(row) + "\n")
    return value, outputs


@dataclass
class FinetuneResult:
    model: GlycanModel
    history: list[dict]
    best_epoch: int
    best_valid: float
    adam: AdamState
    test_metric: float | None = None
    extra: dict = field(default_factory=dict)


def prepare_model(model: GlycanModel, task: TaskSpec, seed: int) -> GlycanModel:
    """Drop pre-training heads and attach a freshly initialized task head."""
    params = Parameters()
    for name, t in model.params.items():
        if name.startswith("pretrain.") or name.startswith(HEAD):
            continue
        params.add(name, t.data, trainable=model.params.is_trainable(name))
    init_head(params, task, model.config.hidden_dim, np.random.default_rng([seed, 2]))
    return GlycanModel(model.config, model.mono_vocab, model.link_vocab, params,
                       model.atom_vocab, model.template_mode,
                       dict(model.extra, task=asdict(task)))


def finetune(model: GlycanModel, samples: Sequence[Sample], task: TaskSpec, mode: str = "scratch",
             seed: int = 0, proteins=None, log_path=None, track_train_metric: bool = False,
             epochs: int | None = None) -> FinetuneResult:
    """Train encoder and head on the ``train`` split, validate after every
    epoch and restore the parameters of the best validation epoch.

    ``mode="pretrained"`` scales the encoder learning rate by
    ``task.encoder_lr_ratio``.
    """
    if mode not in ("scratch", "pretrained"):
        raise ValueError("mode must be 'scratch' or 'pretrained'")
    train = [s for s in samples if s.split == "train"]
    valid = [s for s in samples if s.split == "valid"]
    test = [s for s in samples if s.split == "test"]
    if not train:
        raise EmptyInput("training split is empty")
    model = prepare_model(model, task, seed)
    adam = AdamState(lr=task.lr, weight_decay=task.weight_decay)
    if mode == "pretrained":
        adam.lr_scale["encoder."] = task.encoder_lr_ratio
    rng = np.random.default_rng([seed, 3])
    n_epochs = epochs if epochs is not None else task.epochs
    history: list[dict] = []
    best_state, best_value = None, -np.inf
    fh = open(log_path, "w") if log_path is not None else None
    try:
        for epoch in range(1, n_epochs + 1):
            order = rng.permutation(len(train))
            total, count = 0.0, 0
            for lo in range(0, len(order), task.batch_size):
                chunk = [train[i] for i in order[lo:lo + task.batch_size]]
                model.params.zero_grad()
                loss = task_loss(forward_samples(model, chunk, task, proteins, training=True), chunk, task)
                if not np.isfinite(loss.data):
                    raise FloatingPointError(f"non-finite training loss at epoch {epoch}")
                grads = ad.backward(loss, model.params)
                ad.adam_step(model.params, grads, adam)
                total += float(loss.data) * len(chunk)
                count += len(chunk)
            rec = {"epoch": epoch, "loss": total / count}
            if track_train_metric:
                rec["train_metric"] = evaluate(model, train, task, proteins)[0]
            if valid:
                rec["valid_metric"] = evaluate(model, valid, task, proteins)[0]
            history.append(rec)
            if fh is not None:
                fh.write(json.dumps(rec) + "\n")
            value = rec.get("valid_metric", -rec["loss"])
            if value > best_value:
                best_value = value
                best_state = {k: v.copy() for k, v in model.params.state().items()}
    finally:
        if fh is not None:
            fh.close()
    key = "valid_metric" if valid else "loss"
    values = [r[key] if valid else -r[key] for r in history]
    best_epoch = select_best_epoch(values)
    model.params.load_state(best_state)
    result = FinetuneResult(model, history, best_epoch, float(best_value), adam)
    if test:
        result.test_metric = evaluate(model, test, task, proteins)[0]
    model.extra["best_epoch"] = best_epoch
    return result

