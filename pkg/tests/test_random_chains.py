import numpy as np
import pytest

from chainlab.chain_core import strong_aperiodicity_gamma
from chainlab.errors import ChainError
from chainlab.random_chains import (
    FAMILIES,
    GeneratorSpec,
    expected_chain,
    expected_matrix,
    feedback_coefficient,
    generate,
    sample_matrix,
)
from chainlab.reciprocity import approximate_reciprocity_beta, beta_trend, looks_unbounded

SPECS = [
    GeneratorSpec("identity", 3),
    GeneratorSpec("gossip-pairs", 2, {"pair_prob": 0.3}, 5),
    GeneratorSpec("gossip-pairs", 4, {"pair_prob": 0.7, "mixing": 0.3}, 6),
    GeneratorSpec("lazy-random-walk", 4, {"self_weight": 0.4, "edge_prob": 0.3}, 7),
    GeneratorSpec("one-directional-elite", 3, {"elite": 2}, 8),
    GeneratorSpec("block-diagonal-mixers", 5, {"blocks": (2, 3), "leak": 0.3, "leak_decay": 0.9}, 9),
    GeneratorSpec("static-perturbed", 3, {"noise": 0.4}, 10),
]


def test_gossip_pair_prob_zero_is_identity():
    c = generate(GeneratorSpec("gossip-pairs", 4, {"pair_prob": 0.0}, 1), 30)
    assert np.array_equal(c.matrices, np.broadcast_to(np.eye(4), (30, 4, 4)))


def test_lazy_walk_self_weight_one_is_identity():
    c = generate(GeneratorSpec("lazy-random-walk", 5, {"self_weight": 1.0}, 2), 30)
    assert np.array_equal(c.matrices, np.broadcast_to(np.eye(5), (30, 5, 5)))


def test_two_node_gossip_is_static_mixing():
    c = generate(GeneratorSpec("gossip-pairs", 2, {}, 3), 20)
    assert np.array_equal(c.matrices, np.full((20, 2, 2), 0.5))


def test_expected_two_node_gossip():
    p = 0.3
    e = expected_matrix(GeneratorSpec("gossip-pairs", 2, {"pair_prob": p}), 0)
    assert np.allclose(e, (1 - p) * np.eye(2) + p * np.full((2, 2), 0.5), atol=1e-15)
    assert np.array_equal(expected_chain(GeneratorSpec("identity", 3), 4).at(2), np.eye(3))


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family}-{s.n}")
def test_expected_matrix_monte_carlo(spec):
    t = 2
    draws = np.stack([sample_matrix(spec, t, replicate=r) for r in range(1, 100_001)])
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    exact = expected_matrix(spec, t)
    assert np.all(np.abs(mean - exact) <= 3 * se + 1e-12)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family}-{s.n}")
def test_every_family_stochastic(spec):
    c = generate(spec, 50)
    assert c.classification() == "stochastic"
    assert expected_chain(spec, 5).classification() == "stochastic"


def test_deterministic_and_order_free():
    spec = GeneratorSpec("lazy-random-walk", 4, {"edge_prob": 0.4}, 123)
    a = generate(spec, 40)
    b = generate(spec, 40)
    assert np.array_equal(a.matrices, b.matrices)
    later = generate(spec, 10, t0=30)
    assert np.array_equal(later.matrices, a.matrices[30:])
    assert np.array_equal(a.at(75), sample_matrix(spec, 75))


def test_threads_do_not_change_draws(monkeypatch):
    from chainlab._parallel import map_ordered

    spec = GeneratorSpec("gossip-pairs", 5, {"pair_prob": 0.6}, 99)
    serial = [sample_matrix(spec, t) for t in range(64)]
    monkeypatch.setenv("CHAINLAB_THREADS", "8")
    threaded = map_ordered(lambda t: sample_matrix(spec, t), range(64))
    assert all(np.array_equal(x, y) for x, y in zip(serial, threaded))


def test_seeds_differ():
    a = generate(GeneratorSpec("static-perturbed", 3, {}, 1), 5).matrices
    b = generate(GeneratorSpec("static-perturbed", 3, {}, 2), 5).matrices
    assert not np.array_equal(a, b)


def test_strong_aperiodicity_by_construction():
    assert strong_aperiodicity_gamma(generate(GeneratorSpec("gossip-pairs", 4, {"mixing": 0.3}, 0), 100)) == 0.7
    lazy = generate(GeneratorSpec("lazy-random-walk", 4, {"self_weight": 0.4}, 0), 100)
    assert strong_aperiodicity_gamma(lazy) >= 0.4


def test_elite_is_not_reciprocal():
    c = generate(GeneratorSpec("one-directional-elite", 3, {"elite": 0}, 4), 400)
    assert np.all(c.matrices[:, 0, 0] == 1.0)
    assert looks_unbounded(beta_trend(c, 0.5, 400))


def test_block_mixers_never_cross_without_leak():
    c = generate(GeneratorSpec("block-diagonal-mixers", 5, {"blocks": (2, 3)}, 4), 100)
    assert np.all(c.matrices[:, :2, 2:] == 0) and np.all(c.matrices[:, 2:, :2] == 0)
    assert approximate_reciprocity_beta(c, 1.0).beta_required == pytest.approx(0, abs=1e-12)


def test_feedback_examples():
    gossip = feedback_coefficient(GeneratorSpec("gossip-pairs", 3, {"mixing": 0.5}, 1), 2000)
    assert gossip.gamma_hat == pytest.approx(0.5, abs=1e-12) and not gossip.vacuous
    lazy = feedback_coefficient(GeneratorSpec("lazy-random-walk", 3, {"self_weight": 0.35}, 1), 1000)
    assert lazy.gamma_hat >= 0.35 - 1e-12
    ident = feedback_coefficient(GeneratorSpec("identity", 3), 1000)
    assert ident.vacuous and ident.gamma_hat == 1.0
    with pytest.raises(ChainError):
        feedback_coefficient(GeneratorSpec("identity", 3), 10)


@pytest.mark.parametrize("family, n, params", [
    ("nope", 3, {}),
    ("gossip-pairs", 0, {}),
    ("gossip-pairs", 3, {"bogus": 1.0}),
    ("gossip-pairs", 3, {"mixing": 0.7}),
    ("lazy-random-walk", 3, {"edge_prob": 1.5}),
    ("block-diagonal-mixers", 4, {"blocks": (2, 3)}),
    ("one-directional-elite", 3, {"elite": 3}),
])
def test_spec_validation(family, n, params):
    with pytest.raises(ChainError):
        GeneratorSpec(family, n, params)


def test_header_round_trip():
    for spec in SPECS:
        again = GeneratorSpec.from_header(spec.header())
        assert again == spec
        assert np.array_equal(sample_matrix(again, 3), sample_matrix(spec, 3))
    assert set(FAMILIES) >= {"lazy-random-walk", "gossip-pairs", "one-directional-elite",
                             "block-diagonal-mixers", "static-perturbed"}
