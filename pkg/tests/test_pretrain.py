import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glyforge.autodiff import Parameters, Tensor
from glyforge.model import GlycanModel, init_mlp
from glyforge.notation import parse_glycan
from glyforge.pretrain import (
    ATOM_HEAD,
    MONO_HEAD,
    EmptyMask,
    MaskPlan,
    PretrainConfig,
    apply_mask,
    majority_baselines,
    merge_plans,
    recovery_loss,
    round_half_away,
    run_pretraining,
    sample_mask,
)
from glyforge.structgraph import HeteroGlycanGraph
from glyforge.synthetic import generate_corpus


def even_graph(m=10, per=12):
    n = m * per
    owner = np.repeat(np.arange(m), per)
    return HeteroGlycanGraph(
        atom_types=np.arange(n) % 3, mono_types=np.arange(m) % 4, atom_owner=owner,
        e_aa=np.zeros((0, 3), np.int64),
        e_am=np.zeros((0, 3), np.int64), e_mm=np.zeros((0, 3), np.int64))


def check_laws(g, plan, rho_a, rho_m):
    monos = set(plan.masked_monos.tolist())
    atoms = set(plan.masked_atoms.tolist())
    k_m = round_half_away(rho_m * g.num_monos)
    assert len(monos) == len(plan.masked_monos) == k_m
    owned = {a for a in range(g.num_atoms) if g.atom_owner[a] in monos}
    assert owned <= atoms  # owner closure
    pool = g.num_atoms - len(owned)
    assert len(atoms) == len(plan.masked_atoms) == len(owned) + round_half_away(rho_a * pool)
    np.testing.assert_array_equal(plan.atom_targets, g.atom_types[plan.masked_atoms])
    np.testing.assert_array_equal(plan.mono_targets, g.mono_types[plan.masked_monos])


def test_round_half_away():
    assert [round_half_away(x) for x in (0.5, 1.5, 2.5, 2.4999, -0.5, 0.0)] == [1, 2, 3, 2, -1, 0]


def test_empty_ratios_give_empty_plan():
    plan = sample_mask(even_graph(), 0.0, 0.0, np.random.default_rng(0))
    assert plan.empty


def test_full_residue_ratio_masks_everything():
    g = even_graph()
    plan = sample_mask(g, 0.3, 1.0, np.random.default_rng(0))
    assert len(plan.masked_monos) == 10 and len(plan.masked_atoms) == 120


def test_even_graph_counts():
    g = even_graph()
    plan = sample_mask(g, 0.5, 0.2, np.random.default_rng(0))
    assert len(plan.masked_monos) == 2
    assert len(plan.masked_atoms) == 24 + 48 == 72


def test_bad_ratio():
    with pytest.raises(ValueError):
        sample_mask(even_graph(), 1.5, 0.1, np.random.default_rng(0))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_mask_laws_on_corpus_graphs(seed, rho_a, rho_m):
    texts = generate_corpus(3, seed % 1000)
    model = GlycanModel.create([parse_glycan(t) for t in texts], hidden_dim=2, num_blocks=1)
    rng = np.random.default_rng(seed)
    for t in texts:
        g = model.graph(t)
        check_laws(g, sample_mask(g, rho_a, rho_m, rng), rho_a, rho_m)


def test_apply_mask_empty_plan_is_identity(tiny_model):
    g = tiny_model.graph("Gal(b1-4)Glc")
    plan = sample_mask(g, 0, 0, np.random.default_rng(0))
    assert apply_mask(g, plan, tiny_model.mono_vocab.unknown_id, tiny_model.atom_vocab.unknown_id) == g


def test_apply_mask_residue_zero():
    model = GlycanModel.create([parse_glycan("Gal(b1-4)Glc")], hidden_dim=2, num_blocks=1)
    g = model.graph("Gal(b1-4)Glc")
    atoms = np.flatnonzero(g.atom_owner == 0)
    plan = MaskPlan(np.array([0]), g.mono_types[[0]], atoms, g.atom_types[atoms])
    out = apply_mask(g, plan, model.mono_vocab.unknown_id, model.atom_vocab.unknown_id)
    assert out.mono_types[0] == model.mono_vocab.unknown_id
    assert len(atoms) == 12
    assert (out.atom_types[atoms] == model.atom_vocab.unknown_id).all()
    np.testing.assert_array_equal(out.atom_types[12:], g.atom_types[12:])
    assert g.mono_types[0] != model.mono_vocab.unknown_id  # input untouched


def test_merge_plans_offsets():
    g1, g2 = even_graph(2, 3), even_graph(3, 2)
    rng = np.random.default_rng(0)
    p1, p2 = sample_mask(g1, 0.5, 0.5, rng), sample_mask(g2, 0.5, 0.5, rng)
    merged = merge_plans([p1, p2], [g1, g2])
    assert merged.masked_atoms.tolist() == p1.masked_atoms.tolist() + (p2.masked_atoms + 6).tolist()
    assert merged.masked_monos.tolist() == p1.masked_monos.tolist() + (p2.masked_monos + 2).tolist()


def head_params(d, c, rng):
    params = Parameters()
    init_mlp(params, ATOM_HEAD, (d, d, c), rng)
    init_mlp(params, MONO_HEAD, (d, d, c), rng)
    return params


def test_uniform_logits_give_log_c():
    c, d = 5, 4
    params = head_params(d, c, np.random.default_rng(0))
    params[ATOM_HEAD + "1.W"].data[:] = 0
    params[MONO_HEAD + "1.W"].data[:] = 0
    za, zm = Tensor(np.random.default_rng(1).normal(size=(6, d))), Tensor(np.ones((2, d)))
    plan = MaskPlan(np.array([1]), np.array([3]), np.array([0, 2, 5]), np.array([0, 1, 4]))
    res = recovery_loss(za, zm, plan, params)
    assert res.loss.item() == pytest.approx(math.log(c), rel=1e-6)
    assert res.num_atoms == 3 and res.num_monos == 1


def test_confident_logits_give_near_zero_loss():
    c, d = 3, 2
    params = head_params(d, c, np.random.default_rng(0))
    for head in (ATOM_HEAD, MONO_HEAD):
        params[head + "1.W"].data[:] = 0
        params[head + "1.b"].data[:] = [0.0, 40.0, 0.0]
    plan = MaskPlan(np.array([0]), np.array([1]), np.array([0, 1]), np.array([1, 1]))
    res = recovery_loss(Tensor(np.zeros((2, d))), Tensor(np.zeros((1, d))), plan, params)
    assert res.loss.item() < 1e-12
    assert res.atom_correct == 2 and res.mono_correct == 1
    assert math.exp(res.atom_nll / res.num_atoms) == pytest.approx(1.0)


def test_loss_is_pooled_mean():
    c, d = 4, 3
    params = head_params(d, c, np.random.default_rng(2))
    rng = np.random.default_rng(3)
    za, zm = Tensor(rng.normal(size=(5, d))), Tensor(rng.normal(size=(3, d)))
    plan = MaskPlan(np.array([0, 2]), np.array([1, 3]), np.array([1, 4, 3]), np.array([0, 2, 2]))
    res = recovery_loss(za, zm, plan, params)
    assert res.loss.item() == pytest.approx((res.atom_nll + res.mono_nll) / 5, rel=1e-6)


def test_empty_plan_raises():
    params = head_params(2, 2, np.random.default_rng(0))
    empty = MaskPlan(np.zeros(0, int), np.zeros(0, int), np.zeros(0, int), np.zeros(0, int))
    with pytest.raises(EmptyMask):
        recovery_loss(Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2))), empty, params)


def small_run(tmp_path, name, epochs=3, seed=0):
    texts = generate_corpus(30, seed=7)
    trees = [parse_glycan(t) for t in texts]
    model = GlycanModel.create(trees, seed=seed, hidden_dim=8, num_blocks=1)
    graphs = [model.graph(t) for t in trees]
    cfg = PretrainConfig(epochs=epochs, batch_size=8, seed=seed)
    return run_pretraining(model, graphs, cfg, tmp_path / name)


def test_pretraining_is_deterministic(tmp_path):
    a = small_run(tmp_path, "a")
    b = small_run(tmp_path, "b")
    assert (tmp_path / "a" / "metrics.jsonl").read_bytes() == (tmp_path / "b" / "metrics.jsonl").read_bytes()
    for name, t in a.model.params.items():
        np.testing.assert_array_equal(t.data, b.model.params[name].data)
    assert len(a.curves) == 3
    assert set(a.curves[0]) == {"epoch", "loss", "atom_acc", "mono_acc", "atom_ppl", "mono_ppl"}


def test_pretrained_checkpoint_loads(tmp_path):
    result = small_run(tmp_path, "c", epochs=1)
    loaded, adam = GlycanModel.load(tmp_path / "c" / "pretrained.ckpt")
    assert adam is not None and adam.t == result.adam.t
    for name, t in result.model.params.items():
        np.testing.assert_array_equal(loaded.params[name].data, t.data)
    assert loaded.extra["pretrain"]["epochs"] == 1


def test_majority_baselines():
    g = even_graph(4, 3)  # atom types cycle 0,1,2 over 12 atoms; mono types 0..3
    base = majority_baselines([g])
    assert base == {"atom": pytest.approx(1 / 3), "mono": pytest.approx(1 / 4)}


def test_config_validation():
    with pytest.raises(ValueError):
        PretrainConfig(rho_a=2.0)
    with pytest.raises(ValueError):
        PretrainConfig(epochs=0)
