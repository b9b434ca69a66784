"""Throughput and memory benchmark for training and inference passes."""
from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import psutil
from threadpoolctl import threadpool_limits

from . import autodiff as ad
from .autodiff import TRACKER, AdamState
from .model import GlycanModel
from .structgraph import HeteroGlycanGraph, batch_graphs
from .tasks import TaskSpec, head_forward, prepare_model

MIB = 1024.0 * 1024.0


@dataclass
class BenchReport:
    variant: str
    training_throughput: float
    inference_throughput: float
    training_peak_mem: float
    inference_peak_mem: float
    batch_size: int
    warmup_batches: int
    measured_batches: int
    repeats: int
    threads: int
    training_samples: int
    inference_samples: int
    training_elapsed: float
    inference_elapsed: float
    training_throughput_std: float
    inference_throughput_std: float
    training_rss_mib: float
    inference_rss_mib: float

    def as_dict(self) -> dict:
        return asdict(self)


def _batches(graphs: Sequence[HeteroGlycanGraph], batch_size: int):
    return [list(graphs[i:i + batch_size]) for i in range(0, len(graphs), batch_size)]


def _measure(step, batches, warmup: int, repeats: int):
    """Per repeat: ``warmup`` untimed batches, then one timed pass over ``batches``."""
    runs = []
    rss = psutil.Process()
    peak_rss = 0
    for _ in range(repeats):
        for k in range(warmup):
            step(batches[k % len(batches)])
        base = TRACKER.current
        TRACKER.reset_peak()
        samples = 0
        start = time.perf_counter()
        for chunk in batches:
            step(chunk)
            samples += len(chunk)
        elapsed = time.perf_counter() - start
        peak_rss = max(peak_rss, rss.memory_info().rss)
        runs.append((samples / elapsed, elapsed, samples, (TRACKER.peak - base) / MIB))
    runs.sort(key=lambda r: r[0])
    median = runs[len(runs) // 2]
    spread = statistics.pstdev(r[0] for r in runs) if len(runs) > 1 else 0.0
    peak = max(r[3] for r in runs)
    return median, spread, peak, peak_rss / MIB


def run_bench(model: GlycanModel, graphs: Sequence[HeteroGlycanGraph], batch_size: int = 256,
              warmup: int = 1, repeats: int = 3, threads: int = 1, seed: int = 0) -> BenchReport:
    """Time training steps (forward, backward, Adam) and eval-mode forwards.

    The model is copied first; a two-class head with seeded random labels
    stands in for a downstream task.
    """
    if not graphs:
        raise ValueError("benchmark dataset is empty")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    task = TaskSpec(kind="multiclass", num_classes=2)
    work = prepare_model(model, task, seed)
    labels = np.random.default_rng(seed).integers(0, 2, size=len(graphs))
    label_of = {id(g): int(labels[i]) for i, g in enumerate(graphs)}
    adam = AdamState()
    batches = _batches(graphs, batch_size)

    def train_step(chunk):
        work.params.zero_grad()
        _, _, zg = work.encode(batch_graphs(chunk), training=True)
        loss = ad.softmax_cross_entropy(head_forward(zg, work.params), [label_of[id(g)] for g in chunk])
        grads = ad.backward(loss, work.params)
        ad.adam_step(work.params, grads, adam)

    def infer_step(chunk):
        _, _, zg = work.encode(batch_graphs(chunk), training=False)
        head_forward(zg, work.params)

    with threadpool_limits(limits=threads):
        train = _measure(train_step, batches, warmup, repeats)
        infer = _measure(infer_step, batches, warmup, repeats)
    (tr_tp, tr_el, tr_n, _), tr_sd, tr_mem, tr_rss = train
    (in_tp, in_el, in_n, _), in_sd, in_mem, in_rss = infer
    return BenchReport(
        variant=model.config.variant,
        training_throughput=tr_tp,
        inference_throughput=in_tp,
        training_peak_mem=max(tr_mem, 0.0),
        inference_peak_mem=max(in_mem, 0.0),
        batch_size=batch_size,
        warmup_batches=warmup,
        measured_batches=len(batches),
        repeats=repeats,
        threads=threads,
        training_samples=tr_n,
        inference_samples=in_n,
        training_elapsed=tr_el,
        inference_elapsed=in_el,
        training_throughput_std=tr_sd,
        inference_throughput_std=in_sd,
        training_rss_mib=tr_rss,
        inference_rss_mib=in_rss,
    )


def format_table(reports: Sequence[BenchReport]) -> str:
    header = ("variant", "train samples/s", "infer samples/s", "train MiB", "infer MiB")
    rows = [header] + [
        (r.variant, f"{r.training_throughput:.1f}", f"{r.inference_throughput:.1f}",
         f"{r.training_peak_mem:.1f}", f"{r.inference_peak_mem:.1f}")
        for r in reports
    ]
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
