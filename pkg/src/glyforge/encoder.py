"""GlycanAA encoder: codebook embedding, relational graph convolution and
hierarchical atom -> atom, atom <-> residue, residue -> residue blocks.

Matrices are row-major node x feature, so a kernel ``W`` acts as
``Z @ W.T``.  Stage parameter names follow ``block{b}.{stage}.W_self``,
``block{b}.{stage}.W_r.{r}`` and ``block{b}.{stage}.bn.*`` under the
``encoder.`` prefix.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Parameters, Tensor
from .structgraph import NUM_AA_RELATIONS, GraphBatch

VARIANTS = ("hierarchical", "single-pass", "mono-only")
READOUTS = ("mono", "all-node")
PREFIX = "encoder."


@dataclass
class ModelConfig:
    hidden_dim: int = 128
    num_blocks: int = 3
    variant: str = "hierarchical"
    readout: str = "mono"
    collapse_am_relations: bool = False
    num_atom_types: int = 6
    num_mono_types: int = 1
    num_mm_relations: int = 0
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.hidden_dim <= 0:
            raise ValueError("hidden_dim must be positive")
        if self.num_blocks < 1:
            raise ValueError("num_blocks must be at least 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")
        if self.num_atom_types < 1 or self.num_mono_types < 1 or self.num_mm_relations < 0:
            raise ValueError("vocabulary sizes must be at least 1")

    @property
    def num_am_relations(self) -> int:
        return 1 if self.collapse_am_relations else 2

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden_dim

    def stages(self) -> dict[str, int]:
        """Stage name -> relation count for one block."""
        if self.variant == "hierarchical":
            return {"aa": NUM_AA_RELATIONS, "am": self.num_am_relations, "mm": self.num_mm_relations}
        if self.variant == "single-pass":
            return {"full": NUM_AA_RELATIONS + self.num_am_relations + self.num_mm_relations}
        return {"mm": self.num_mm_relations}

    def to_dict(self) -> dict:
        return asdict(self)


def _uniform(rng, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def init_encoder_params(config: ModelConfig, rng: np.random.Generator,
                        params: Parameters | None = None) -> Parameters:
    params = Parameters() if params is None else params
    d = config.hidden_dim
    params.add(PREFIX + "embed.atom", rng.standard_normal((config.num_atom_types, d)).astype(np.float32))
    params.add(PREFIX + "embed.mono", rng.standard_normal((config.num_mono_types, d)).astype(np.float32))
    for b in range(config.num_blocks):
        for stage, num_rel in config.stages().items():
            p = f"{PREFIX}block{b}.{stage}."
            params.add(p + "W_self", _uniform(rng, d, (d, d)))
            for r in range(num_rel):
                params.add(p + f"W_r.{r}", _uniform(rng, d, (d, d)))
            params.add(p + "bn.gamma", np.ones(d, dtype=np.float32))
            params.add(p + "bn.beta", np.zeros(d, dtype=np.float32))
            params.add(p + "bn.running_mean", np.zeros(d, dtype=np.float32), trainable=False)
            params.add(p + "bn.running_var", np.ones(d, dtype=np.float32), trainable=False)
    return params


def embed(atom_types, mono_types, params: Parameters) -> tuple[Tensor, Tensor]:
    za = ad.embedding_gather(atom_types, params[PREFIX + "embed.atom"])
    zm = ad.embedding_gather(mono_types, params[PREFIX + "embed.mono"])
    return za, zm


def aggregation_matrix(edges: np.ndarray, num_nodes: int, relations: np.ndarray) -> sp.csr_matrix:
    """Sparse ``(n, n*R')`` matrix of ``1/|N_r(i)|`` weights.

    Column ``src * R' + k`` addresses the message of ``src`` under the k-th
    relation of ``relations``; multiplying it with the row-stacked per-relation
    transforms yields the degree-normalized neighbor sum.
    """
    num_rel = len(relations)
    slot = np.searchsorted(relations, edges[:, 2])
    src, dst = edges[:, 0], edges[:, 1]
    key = dst * num_rel + slot
    _, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
    weights = 1.0 / counts[inverse]
    return sp.csr_matrix((weights, (dst, src * num_rel + slot)), shape=(num_nodes, num_nodes * num_rel))


def rgconv(z: Tensor, edges: np.ndarray, num_relations: int, params: Parameters, prefix: str,
           training: bool = False, momentum: float = 0.1) -> Tensor:
    """``z'_i = W_self z_i + ReLU(BN(sum_r sum_{j in N_r(i)} W_r z_j / |N_r(i)|))``."""
    n, d = z.shape
    if edges.size and (edges[:, :2].min() < 0 or edges[:, :2].max() >= n):
        raise ad.IndexOutOfRange("edge endpoint outside the node set")
    if edges.size and (edges[:, 2].min() < 0 or edges[:, 2].max() >= num_relations):
        raise ad.IndexOutOfRange("relation id outside the relation set")
    out = z @ params[prefix + "W_self"].T
    if edges.size:
        present = np.unique(edges[:, 2])
        kernels = ad.concat([params[f"{prefix}W_r.{r}"].T for r in present], axis=1)
        stacked = (z @ kernels).reshape(n * len(present), d)
        agg = ad.spmm(aggregation_matrix(edges, n, present), stacked)
    else:
        agg = Tensor(np.zeros((n, d), dtype=z.dtype))
    normed = ad.batch_norm(
        agg, params[prefix + "bn.gamma"], params[prefix + "bn.beta"],
        params[prefix + "bn.running_mean"].data, params[prefix + "bn.running_var"].data,
        training=training, momentum=momentum,
    )
    return out + ad.relu(normed)


def block_forward(za: Tensor, zm: Tensor, batch: GraphBatch, params: Parameters, block: int,
                  config: ModelConfig, training: bool = False) -> tuple[Tensor, Tensor]:
    g = batch.graph
    n = za.shape[0]
    p = f"{PREFIX}block{block}."
    mom = config.bn_momentum
    za1 = rgconv(za, g.e_aa, NUM_AA_RELATIONS, params, p + "aa.", training, mom)
    union = rgconv(ad.concat([za1, zm], axis=0), g.e_am, config.num_am_relations, params,
                   p + "am.", training, mom)
    za2 = ad.slice_rows(union, 0, n)
    zm1 = ad.slice_rows(union, n, union.shape[0])
    zm2 = rgconv(zm1, g.e_mm, config.num_mm_relations, params, p + "mm.", training, mom)
    return za2, zm2


def _full_edges(batch: GraphBatch, config: ModelConfig) -> np.ndarray:
    g = batch.graph
    n = g.num_atoms
    am = g.e_am + [0, 0, NUM_AA_RELATIONS]
    mm = g.e_mm + [n, n, NUM_AA_RELATIONS + config.num_am_relations]
    return np.concatenate([g.e_aa, am, mm]).reshape(-1, 3)


def readout(zm: Tensor, mono_graph, num_graphs: int, za: Tensor | None = None,
            atom_graph=None) -> Tensor:
    """``[mean, max]`` pooling per graph over residue rows (or over atoms and
    residues together when ``za`` is given)."""
    if zm.shape[0] == 0:
        raise ValueError("cannot read out an empty graph")
    rows, ids = zm, np.asarray(mono_graph)
    if za is not None:
        rows = ad.concat([za, zm], axis=0)
        ids = np.concatenate([np.asarray(atom_graph), ids])
    return ad.concat([ad.segment_mean(rows, ids, num_graphs), ad.segment_max(rows, ids, num_graphs)],
                     axis=1)


def encode(batch: GraphBatch, params: Parameters, config: ModelConfig,
           training: bool = False) -> tuple[Tensor, Tensor, Tensor]:
    """Embed, run ``num_blocks`` blocks of the configured variant, read out.

    Returns ``(Z_a, Z_m, z_g)`` with ``z_g`` of shape ``(num_graphs, 2d)``.
    """
    g = batch.graph
    za, zm = embed(g.atom_types, g.mono_types, params)
    if config.variant == "hierarchical":
        for b in range(config.num_blocks):
            za, zm = block_forward(za, zm, batch, params, b, config, training)
    elif config.variant == "single-pass":
        edges = _full_edges(batch, config)
        num_rel = config.stages()["full"]
        n = g.num_atoms
        z = ad.concat([za, zm], axis=0)
        for b in range(config.num_blocks):
            z = rgconv(z, edges, num_rel, params, f"{PREFIX}block{b}.full.", training, config.bn_momentum)
        za, zm = ad.slice_rows(z, 0, n), ad.slice_rows(z, n, z.shape[0])
    else:
        for b in range(config.num_blocks):
            zm = rgconv(zm, g.e_mm, config.num_mm_relations, params, f"{PREFIX}block{b}.mm.",
                        training, config.bn_momentum)
    if config.readout == "all-node":
        zg = readout(zm, batch.mono_graph, batch.num_graphs, za, batch.atom_graph)
    else:
        zg = readout(zm, batch.mono_graph, batch.num_graphs)
    return za, zm, zg
