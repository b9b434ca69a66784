"""``glyforge`` command-line entry point.

Every command reads an optional JSON config (``--config``).  Any flag of the
form ``--section.key VALUE`` (or ``--set section.key=VALUE``) overrides the
config key with that dotted path; ``--seed``, ``--threads`` and ``--out``
override ``seed``, ``threads`` and ``output``.

Exit codes: 0 success, 1 config/usage error, 2 data/parse error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import statistics
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .autodiff import CheckpointError
from .encoder import ModelConfig
from .notation import GlycanSyntaxError, canonicalize, parse_glycan
from .pretrain import PretrainConfig
from .structgraph import UnknownLinkage, UnknownMonosaccharide, graph_stats
from .tasks import TaskSpec

log = logging.getLogger("glyforge")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def _defaults(cls) -> dict:
    return {f.name: f.default for f in fields(cls)}


_MODEL_KEYS = ("hidden_dim", "num_blocks", "variant", "readout", "collapse_am_relations", "bn_momentum")

DEFAULT_CONFIG = {
    "seed": 0,
    "threads": 1,
    "output": None,
    "template_mode": "lenient",
    "model": {k: v for k, v in _defaults(ModelConfig).items() if k in _MODEL_KEYS},
    "pretrain": {k: v for k, v in _defaults(PretrainConfig).items() if k != "seed"},
    "task": {
        "kind": "multiclass", "num_classes": 2, "metric": None, "epochs": None, "batch_size": None,
        "lr": 5e-4, "weight_decay": 1e-3, "encoder_lr_ratio": 0.1,
    },
    "data": {"corpus": None, "dataset": None, "proteins": None, "checkpoint": None,
             "downstream": [], "split": "test"},
    "bench": {"batch_size": 256, "warmup": 1, "repeats": 3, "variants": ["hierarchical", "mono-only"],
              "synthetic": 0},
    "gradcheck": {"hidden_dim": 4, "tolerance": 1e-3, "h": 1e-4, "glycan": "Gal(b1-4)Glc"},
}


@dataclass
class RunConfig:
    command: str
    values: dict
    seeds: list[int] = field(default_factory=list)

    def get(self, dotted: str):
        node = self.values
        for part in dotted.split("."):
            node = node[part]
        return node

    @property
    def threads(self) -> int:
        return int(self.values["threads"])

    def model_config(self) -> dict:
        return dict(self.values["model"])

    def pretrain_config(self, seed: int) -> PretrainConfig:
        return PretrainConfig(seed=seed, **self.values["pretrain"])

    def task_spec(self, protein_dim: int = 0) -> TaskSpec:
        return TaskSpec(protein_dim=protein_dim, **self.values["task"])

    def record(self, seed: int) -> dict:
        return {"command": self.command, "seed": seed, "config": self.values}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(doc: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = doc
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def _merge(base: dict, override: dict, prefix: str = "") -> None:
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {prefix + key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            _merge(base[key], value, prefix + key + ".")
        else:
            base[key] = value


def build_config(args: argparse.Namespace, extra: list[str]) -> RunConfig:
    values = copy.deepcopy(DEFAULT_CONFIG)
    env_threads = os.environ.get("GLYFORGE_THREADS")
    if env_threads:
        values["threads"] = int(env_threads)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            _merge(values, json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    overrides: list[tuple[str, str]] = []
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides.append(tuple(item.split("=", 1)))
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        if "=" in tok:
            key, val = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"flag {tok} needs a value")
            key, val = tok[2:], extra[i + 1]
            i += 2
        overrides.append((key, val))
    for key, val in overrides:
        _set_dotted(values, key, _parse_value(val))
    if args.threads is not None:
        values["threads"] = args.threads
    if args.out is not None:
        values["output"] = args.out
    seeds = list(args.seed) if args.seed else [int(values["seed"])]
    values["seed"] = seeds[0]
    if int(values["threads"]) < 1:
        raise ConfigError("threads must be at least 1")
    try:
        ModelConfig(**values["model"])
        PretrainConfig(**values["pretrain"])
        TaskSpec(**values["task"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(args.command, values, seeds)


def _require_file(path, what: str) -> Path:
    if path is None:
        raise ConfigError(f"missing {what} path")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} file {p} does not exist")
    return p


def _out_dir(cfg: RunConfig) -> Path:
    out = cfg.values["output"]
    if out is None:
        raise ConfigError("missing output path (--out)")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# -- commands ----------------------------------------------------------------

def cmd_parse(cfg: RunConfig, args) -> int:
    if args.file:
        texts = [line.strip() for line in _require_file(args.file, "input").read_text().splitlines()
                 if line.strip()]
    elif args.glycan:
        texts = [args.glycan]
    else:
        raise ConfigError("parse needs a glycan string or --file")
    from .model import GlycanModel

    status = EXIT_OK
    for text in texts:
        try:
            tree = parse_glycan(text)
            model = GlycanModel.create([tree], template_mode=cfg.values["template_mode"], hidden_dim=1,
                                       num_blocks=1)
            g = model.graph(tree)
        except (GlycanSyntaxError, UnknownMonosaccharide, UnknownLinkage) as exc:
            sys.stderr.write(json.dumps({"input": text, "error": type(exc).__name__,
                                         "message": str(exc)}) + "\n")
            status = EXIT_DATA
            continue
        stats = graph_stats(g).as_dict()
        doc = {} if args.stats_only else {"canonical": canonicalize(tree)}
        doc.update(stats)
        print(json.dumps(doc))
    return status


def cmd_curate(cfg: RunConfig, args) -> int:
    from .datakit import curate, load_records, read_jsonl

    src = _require_file(cfg.values["data"]["corpus"], "corpus")
    downstream_paths = [_require_file(p, "downstream dataset") for p in cfg.values["data"]["downstream"]]
    out = _out_dir(cfg)
    records = load_records(src)
    sets = []
    for path in downstream_paths:
        forms = set()
        for doc in read_jsonl(path):
            try:
                forms.add(canonicalize(parse_glycan(doc["glycan"])))
            except GlycanSyntaxError:
                continue
        sets.append(forms)
    kept, report = curate(records, sets)
    with open(out / "curated.jsonl", "w") as fh:
        for rec in kept:
            fh.write(json.dumps({"glycan": rec.canonical}) + "\n")
    _write_json(out / "curation_report.json", report.as_dict())
    print(json.dumps(report.as_dict()))
    return EXIT_OK


def _load_corpus(path: Path):
    from .datakit import load_records

    records = load_records(path)
    bad = [r for r in records if not r.parsed]
    if bad:
        raise DataError(f"{len(bad)} corpus entries do not parse, first: {bad[0].raw!r} ({bad[0].error})")
    return [r.tree for r in records]


def cmd_pretrain(cfg: RunConfig, args) -> int:
    from .model import GlycanModel
    from .pretrain import run_pretraining
    from .report import plot_pretrain_curves

    corpus = _require_file(cfg.values["data"]["corpus"], "corpus")
    trees = _load_corpus(corpus)
    if not trees:
        raise DataError("pre-training corpus is empty")
    out = _out_dir(cfg)
    summary = []
    for seed in cfg.seeds:
        run_dir = out if len(cfg.seeds) == 1 else out / f"seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        model = GlycanModel.create(trees, seed=seed, template_mode=cfg.values["template_mode"],
                                   **cfg.model_config())
        graphs = [model.graph(t) for t in trees]
        result = run_pretraining(model, graphs, cfg.pretrain_config(seed), run_dir)
        plot_pretrain_curves(result.curves, run_dir / "curves.png")
        final = dict(result.curves[-1], seed=seed, initial_atom_loss=result.initial_atom_loss,
                     majority_atom=result.majority["atom"], majority_mono=result.majority["mono"])
        _write_json(run_dir / "run.json", cfg.record(seed) | {"final": final})
        summary.append(final)
    print(json.dumps(summary[-1] if len(summary) == 1 else summary))
    return EXIT_OK


def _load_dataset(cfg: RunConfig):
    from .datakit import load_protein_embeddings, load_task_dataset

    samples = load_task_dataset(_require_file(cfg.values["data"]["dataset"], "dataset"))
    proteins = None
    if cfg.values["task"]["kind"] == "regression-interaction":
        proteins = load_protein_embeddings(_require_file(cfg.values["data"]["proteins"], "protein embedding"))
    for s in samples:
        try:
            parse_glycan(s.glycan)
        except GlycanSyntaxError as exc:
            raise DataError(f"dataset glycan {s.glycan!r} does not parse: {exc}") from exc
        if proteins is not None and s.protein_id not in proteins:
            raise DataError(f"protein id {s.protein_id!r} has no embedding")
    return samples, proteins


def _protein_dim(proteins) -> int:
    return len(next(iter(proteins.values()))) if proteins else 0


def cmd_train(cfg: RunConfig, args) -> int:
    from .model import GlycanModel
    from .report import plot_finetune_curves
    from .tasks import finetune

    samples, proteins = _load_dataset(cfg)
    ckpt = cfg.values["data"]["checkpoint"]
    if ckpt is not None:
        _require_file(ckpt, "checkpoint")
    out = _out_dir(cfg)
    task = cfg.task_spec(_protein_dim(proteins))
    runs = []
    for seed in cfg.seeds:
        run_dir = out / f"seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        if ckpt is not None:
            model, _ = GlycanModel.load(ckpt)
            mode = "pretrained"
        else:
            trees = [parse_glycan(s.glycan) for s in samples]
            model = GlycanModel.create(trees, seed=seed, template_mode=cfg.values["template_mode"],
                                       **cfg.model_config())
            mode = "scratch"
        result = finetune(model, samples, task, mode=mode, seed=seed, proteins=proteins,
                          log_path=run_dir / "metrics.jsonl")
        result.model.save(run_dir / "model.ckpt")
        plot_finetune_curves(result.history, run_dir / "curves.png", task.metric)
        doc = {"seed": seed, "mode": mode, "best_epoch": result.best_epoch,
               "valid_metric": result.best_valid, "test_metric": result.test_metric}
        _write_json(run_dir / "run.json", cfg.record(seed) | {"result": doc})
        runs.append(doc)
    summary = {"metric": task.metric, "seeds": cfg.seeds, "runs": runs}
    for key in ("valid_metric", "test_metric"):
        vals = [r[key] for r in runs if r[key] is not None]
        if vals:
            summary[key] = {"mean": statistics.fmean(vals),
                            "std": statistics.pstdev(vals) if len(vals) > 1 else 0.0}
    _write_json(out / "summary.json", summary)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    from .model import GlycanModel
    from .tasks import evaluate

    ckpt = _require_file(cfg.values["data"]["checkpoint"], "checkpoint")
    samples, proteins = _load_dataset(cfg)
    split = cfg.values["data"]["split"]
    chosen = [s for s in samples if s.split == split]
    if not chosen:
        raise DataError(f"split {split!r} is empty")
    model, _ = GlycanModel.load(ckpt)
    if "task" not in model.extra:
        raise ConfigError(f"{ckpt} holds no task head; train it first")
    task = TaskSpec(**model.extra["task"])
    out = _out_dir(cfg)
    value, _ = evaluate(model, chosen, task, proteins, predictions_path=out / "predictions.jsonl")
    doc = {"metric": task.metric, "value": value, "split": split, "samples": len(chosen),
           "seed": cfg.values["seed"]}
    _write_json(out / "eval.json", doc)
    print(json.dumps(doc))
    return EXIT_OK


def cmd_export(cfg: RunConfig, args) -> int:
    from .datakit import export_representations, load_task_dataset
    from .model import GlycanModel

    samples = load_task_dataset(_require_file(cfg.values["data"]["dataset"], "dataset"))
    ckpt = cfg.values["data"]["checkpoint"]
    out = _out_dir(cfg)
    if ckpt is not None:
        model, _ = GlycanModel.load(_require_file(ckpt, "checkpoint"))
    else:
        model = GlycanModel.create([parse_glycan(s.glycan) for s in samples], seed=cfg.values["seed"],
                                   template_mode=cfg.values["template_mode"], **cfg.model_config())
    count = export_representations(model, samples, out / "representations.jsonl")
    print(json.dumps({"rows": count, "dim": model.config.output_dim, "seed": cfg.values["seed"]}))
    return EXIT_OK


def cmd_bench(cfg: RunConfig, args) -> int:
    from .benchkit import format_table, run_bench
    from .model import GlycanModel
    from .report import plot_bench
    from .synthetic import generate_corpus

    bench = cfg.values["bench"]
    if bench["synthetic"]:
        trees = [parse_glycan(s) for s in generate_corpus(int(bench["synthetic"]), cfg.values["seed"])]
    else:
        trees = _load_corpus(_require_file(cfg.values["data"]["corpus"], "corpus"))
    out = _out_dir(cfg)
    reports = []
    for variant in bench["variants"]:
        model = GlycanModel.create(trees, seed=cfg.values["seed"], template_mode=cfg.values["template_mode"],
                                   **(cfg.model_config() | {"variant": variant}))
        graphs = [model.graph(t) for t in trees]
        reports.append(run_bench(model, graphs, bench["batch_size"], bench["warmup"], bench["repeats"],
                                 cfg.threads, cfg.values["seed"]))
    _write_json(out / "bench.json", {"seed": cfg.values["seed"], "reports": [r.as_dict() for r in reports]})
    table = format_table(reports)
    (out / "bench.txt").write_text(table + "\n")
    plot_bench(reports, out / "bench.png")
    print(table)
    return EXIT_OK


def gradcheck_report(glycan: str = "Gal(b1-4)Glc", hidden_dim: int = 4, tolerance: float = 1e-3,
                     h: float = 1e-4, seed: int = 0, num_blocks: int = 1):
    """Finite-difference check of a small encoder plus classification head at float64."""
    from . import autodiff as ad
    from .model import GlycanModel
    from .tasks import head_forward, prepare_model

    tree = parse_glycan(glycan)
    model = GlycanModel.create([tree], seed=seed, hidden_dim=hidden_dim, num_blocks=num_blocks)
    model = prepare_model(model, TaskSpec(kind="multiclass", num_classes=3), seed)
    rng = np.random.default_rng(seed)
    # move BN off its identity init so the check also covers non-trivial statistics
    for name, t in model.params.items():
        if name.endswith("bn.running_mean"):
            t.data[:] = rng.normal(0, 0.1, t.shape)
        elif name.endswith("bn.running_var"):
            t.data[:] = rng.uniform(0.5, 1.5, t.shape)
        elif name.endswith("bn.beta"):
            t.data[:] = rng.normal(0, 0.5, t.shape)
    with ad.precision(np.float64):
        params = model.params.astype(np.float64)
        model.params = params
        batch = model.batch([tree])

        def closure():
            _, _, zg = model.encode(batch, training=False)
            return ad.softmax_cross_entropy(head_forward(zg, params), [1])

        return ad.finite_diff_check(closure, params, tolerance=tolerance, h=h)


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    gc = cfg.values["gradcheck"]
    report = gradcheck_report(gc["glycan"], int(gc["hidden_dim"]), float(gc["tolerance"]), float(gc["h"]),
                              cfg.values["seed"])
    doc = report.as_dict() | {"seed": cfg.values["seed"]}
    if cfg.values["output"] is not None:
        out = _out_dir(cfg)
        _write_json(out / "gradcheck.json", doc)
    print(json.dumps({k: doc[k] for k in ("max_rel_error", "passed", "tolerance", "seed")}))
    return EXIT_OK if report.passed else EXIT_NUMERIC


COMMANDS = {
    "parse": cmd_parse,
    "curate": cmd_curate,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "export-embeddings": cmd_export,
    "bench": cmd_bench,
    "gradcheck": cmd_gradcheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glyforge", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, action="append", help="random seed (repeatable)")
        p.add_argument("--threads", type=int, help="BLAS thread count (default $GLYFORGE_THREADS or 1)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a dotted config key")
        if name == "parse":
            p.add_argument("glycan", nargs="?")
            p.add_argument("--file")
            p.add_argument("--stats-only", action="store_true")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = build_config(args, extra)
        with threadpool_limits(limits=cfg.threads):
            return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        sys.stderr.write(json.dumps({"error": "config", "message": str(exc)}) + "\n")
        return EXIT_CONFIG
    except (DataError, GlycanSyntaxError, UnknownMonosaccharide, UnknownLinkage, CheckpointError,
            KeyError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": "data", "type": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_DATA
    except FloatingPointError as exc:
        sys.stderr.write(json.dumps({"error": "numerical", "message": str(exc)}) + "\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
