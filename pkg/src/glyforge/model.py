"""A model bundle: configuration, vocabularies and parameters, with checkpoint I/O."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Parameters, Tensor
from .encoder import ModelConfig, encode, init_encoder_params
from .notation import GlycanTree, LinkageVocab, MonoVocab, build_vocabularies, parse_glycan
from .structgraph import AtomVocab, GraphBatch, HeteroGlycanGraph, assemble, batch_graphs

FORMAT_VERSION = 1


def vocab_hash(items: Sequence[str]) -> str:
    return hashlib.sha256(json.dumps(list(items)).encode()).hexdigest()[:16]


def init_mlp(params: Parameters, prefix: str, dims: Sequence[int], rng: np.random.Generator) -> None:
    """Linear layers ``dims[0] -> dims[1] -> ...``; weights uniform(+-1/sqrt(fan_in)), zero biases."""
    for k, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        params.add(f"{prefix}{k}.W", rng.uniform(-bound, bound, (fan_in, fan_out)).astype(np.float32))
        params.add(f"{prefix}{k}.b", np.zeros(fan_out, dtype=np.float32))


def mlp_forward(x: Tensor, params: Parameters, prefix: str, layers: int = 2) -> Tensor:
    """Linear -> GELU -> Linear."""
    for k in range(layers):
        x = x @ params[f"{prefix}{k}.W"] + params[f"{prefix}{k}.b"]
        if k < layers - 1:
            x = ad.gelu(x)
    return x


@dataclass
class GlycanModel:
    config: ModelConfig
    mono_vocab: MonoVocab
    link_vocab: LinkageVocab
    params: Parameters
    atom_vocab: AtomVocab = field(default_factory=AtomVocab)
    template_mode: str = "lenient"
    extra: dict = field(default_factory=dict)

    @classmethod
    def create(cls, trees: Iterable[GlycanTree], config: ModelConfig | None = None,
               seed: int = 0, template_mode: str = "lenient", **overrides) -> "GlycanModel":
        mono_vocab, link_vocab = build_vocabularies(trees)
        atom_vocab = AtomVocab()
        base = (config.to_dict() if config else {}) | overrides
        base.update(num_atom_types=len(atom_vocab), num_mono_types=len(mono_vocab),
                    num_mm_relations=link_vocab.num_relations)
        cfg = ModelConfig(**base)
        params = init_encoder_params(cfg, np.random.default_rng(seed))
        return cls(cfg, mono_vocab, link_vocab, params, atom_vocab, template_mode)

    @property
    def vocabs(self) -> tuple[MonoVocab, LinkageVocab, AtomVocab]:
        return self.mono_vocab, self.link_vocab, self.atom_vocab

    def graph(self, glycan: str | GlycanTree) -> HeteroGlycanGraph:
        tree = parse_glycan(glycan) if isinstance(glycan, str) else glycan
        return assemble(tree, self.vocabs, self.template_mode, self.config.collapse_am_relations)

    def batch(self, glycans: Sequence[str | GlycanTree | HeteroGlycanGraph]) -> GraphBatch:
        graphs = [g if isinstance(g, HeteroGlycanGraph) else self.graph(g) for g in glycans]
        return batch_graphs(graphs)

    def encode(self, batch: GraphBatch, training: bool = False):
        return encode(batch, self.params, self.config, training)

    def embed_glycans(self, glycans, batch_size: int = 256) -> np.ndarray:
        """Eval-mode ``z_g`` rows for ``glycans``."""
        rows = []
        for i in range(0, len(glycans), batch_size):
            _, _, zg = self.encode(self.batch(glycans[i:i + batch_size]), training=False)
            rows.append(zg.data)
        return np.concatenate(rows) if rows else np.zeros((0, self.config.output_dim), np.float32)

    # -- persistence -----------------------------------------------------------
    def header(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "template_mode": self.template_mode,
            "vocab": {
                "mono": list(self.mono_vocab.names),
                "linkage": list(self.link_vocab.linkages),
                "atom": list(self.atom_vocab.elements),
            },
            "vocab_hashes": {
                "mono": vocab_hash(self.mono_vocab.names),
                "linkage": vocab_hash(self.link_vocab.linkages),
                "atom": vocab_hash(self.atom_vocab.elements),
            },
            "extra": self.extra,
        }

    def save(self, path, adam: AdamState | None = None) -> None:
        ad.save_checkpoint(path, self.params, self.header(), adam)

    @classmethod
    def load(cls, path) -> tuple["GlycanModel", AdamState | None]:
        header, params, adam = ad.load_checkpoint(path)
        vocab = header["vocab"]
        for key, items in vocab.items():
            if vocab_hash(items) != header["vocab_hashes"][key]:
                raise ad.CheckpointError(f"{path}: {key} vocabulary hash mismatch")
        model = cls(
            config=ModelConfig(**header["config"]),
            mono_vocab=MonoVocab(tuple(vocab["mono"])),
            link_vocab=LinkageVocab(tuple(vocab["linkage"])),
            params=params,
            atom_vocab=AtomVocab(tuple(vocab["atom"])),
            template_mode=header.get("template_mode", "lenient"),
            extra=header.get("extra", {}),
        )
        return model, adam
