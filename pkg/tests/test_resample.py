import math

import numpy as np
import pytest

from lfiw_debias.resample.diagnostics import INSUFFICIENCY_WEIGHTS
from lfiw_debias.resample.diagnostics import INSUFFICIENCY_WITNESS
from lfiw_debias.resample.diagnostics import exact_delta_kl
from lfiw_debias.resample.diagnostics import exact_kl_diagnostics
from lfiw_debias.resample.diagnostics import kl_diagnostics
from lfiw_debias.resample.distributions import DiscreteDistributionPair
from lfiw_debias.resample.distributions import empirical_frequencies
from lfiw_debias.resample.distributions import kl_divergence
from lfiw_debias.resample.distributions import random_triple
from lfiw_debias.resample.distributions import total_variation
from lfiw_debias.resample.sir import ResampledModel
from lfiw_debias.resample.sir import estimate_partition
from lfiw_debias.resample.sir import exact_partition
from lfiw_debias.resample.sir import exact_sir_density
from lfiw_debias.resample.sir import sir_density
from lfiw_debias.resample.sir import sir_expectation
from lfiw_debias.resample.sir import sir_histogram
from lfiw_debias.resample.sir import sir_sample
from lfiw_debias.resample.sir import sir_sample_many
from lfiw_debias.utils.exceptions import NumericalError
from lfiw_debias.utils.exceptions import SupportError


@pytest.fixture()
def pair() -> DiscreteDistributionPair:
    return DiscreteDistributionPair(p=[0.5, 0.3, 0.2], p_theta=[0.2, 0.3, 0.5])


def test_pair_validation() -> None:
    with pytest.raises(ValueError):
        DiscreteDistributionPair([0.5, 0.6], [0.5, 0.5])
    with pytest.raises(ValueError):
        DiscreteDistributionPair([0.5, 0.5], [1.0])
    with pytest.raises(SupportError):
        DiscreteDistributionPair([0.5, 0.5], [1.0, 0.0])
    relaxed = DiscreteDistributionPair([0.5, 0.5], [1.0, 0.0], absolutely_continuous=False)
    with pytest.raises(SupportError):
        relaxed.oracle_weights()


def test_pair_serialization(pair) -> None:
    restored = DiscreteDistributionPair.from_dict(pair.to_dict())
    assert restored.p.tolist() == pair.p.tolist()
    assert restored.p_theta.tolist() == pair.p_theta.tolist()


def test_oracle_weights_recover_the_target(pair) -> None:
    weights = pair.oracle_weights()
    assert weights.tolist() == pytest.approx([2.5, 1.0, 0.4])
    assert exact_partition(pair, weights) == pytest.approx(1.0)
    assert pair.induced_distribution(weights) == pytest.approx(pair.p)
    assert exact_delta_kl(pair, weights) == pytest.approx(-pair.kl())
    assert pair.weight_fn()(np.array([[0.0], [2.0]])).tolist() == pytest.approx([2.5, 0.4])


def test_densities_and_divergences(pair) -> None:
    assert pair.target_density(1) == pytest.approx(0.3)
    assert pair.model_density(np.array([[0.0], [2.0]])).tolist() == pytest.approx([0.2, 0.5])
    assert kl_divergence(np.array([0.5, 0.5]), np.array([1.0, 0.0])) == math.inf
    assert total_variation(pair.p, pair.p_theta) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        pair.target_density(3)
    with pytest.raises(ValueError):
        pair.target_density(0.5)


def test_empirical_frequencies() -> None:
    assert empirical_frequencies(np.array([[0.0], [2.0], [2.0], [1.0]]), 3).tolist() == [
        0.25,
        0.25,
        0.5,
    ]


def test_random_triple_is_reproducible() -> None:
    first, weights = random_triple(np.random.default_rng(9), 5)
    second, same_weights = random_triple(np.random.default_rng(9), 5)
    assert first.p.tolist() == second.p.tolist()
    assert weights.tolist() == same_weights.tolist()
    assert np.all(weights > 0)
    with pytest.raises(ValueError):
        random_triple(np.random.default_rng(0), 1)


@pytest.mark.parametrize("seed", range(5))
def test_exact_kl_change_matches_delta(seed: int) -> None:
    pair, weights = random_triple(np.random.default_rng(seed), 10)
    diagnostics = exact_kl_diagnostics(pair, weights)
    assert diagnostics.kl_change == pytest.approx(exact_delta_kl(pair, weights), abs=1e-12)


def test_necessary_conditions_are_not_sufficient() -> None:
    diagnostics = exact_kl_diagnostics(INSUFFICIENCY_WITNESS, INSUFFICIENCY_WEIGHTS)
    assert diagnostics.nec1_gap >= 0
    assert diagnostics.nec2_gap >= 0
    assert diagnostics.verdict == "improvement-consistent"
    assert exact_delta_kl(INSUFFICIENCY_WITNESS, INSUFFICIENCY_WEIGHTS) > 0
    assert diagnostics.kl_change > 0


def test_estimated_diagnostics_approach_exact_values(pair) -> None:
    weights = np.array([2.0, 1.0, 0.5])
    rng = np.random.default_rng(2)
    estimated = kl_diagnostics(
        pair.sample_target(50_000, rng), pair.sample_model(50_000, rng), pair.weight_fn(weights)
    )
    exact = exact_kl_diagnostics(pair, weights)
    assert abs(estimated.lhs_estimate - exact.lhs_estimate) < 5 * estimated.lhs_stderr + 1e-9
    assert abs(estimated.nec1_gap - exact.nec1_gap) < 5 * estimated.nec1_stderr + 1e-9
    assert abs(estimated.nec2_gap - exact.nec2_gap) < 5 * estimated.nec2_stderr + 1e-9
    assert estimated.n_real == estimated.n_model == 50_000
    assert set(estimated.to_dict()) >= {"delta_estimate", "kl_change", "verdict"}


def test_diagnostics_need_positive_weights(pair) -> None:
    with pytest.raises(NumericalError):
        kl_diagnostics([[0.0]], [[1.0]], pair.weight_fn([0.0, 1.0, 1.0]))
    with pytest.raises(SupportError):
        exact_kl_diagnostics(pair, [0.0, 1.0, 1.0])


def test_single_particle_returns_base_samples(pair) -> None:
    model = ResampledModel(pair.sample_model, pair.weight_fn(), particles=1)
    draws = sir_sample_many(model, 20_000, seed=0)
    assert draws.shape == (20_000, 1)
    assert total_variation(empirical_frequencies(draws, 3), pair.p_theta) < 0.02
    assert sir_sample(model, seed=0).shape == (1,)


def test_many_particles_approach_the_target(pair) -> None:
    model = ResampledModel(pair.sample_model, pair.weight_fn(), particles=100)
    draws = sir_sample_many(model, 20_000, seed=1, chunk_size=1000)
    assert total_variation(empirical_frequencies(draws, 3), pair.p) < 0.03
    assert np.array_equal(draws, sir_sample_many(model, 20_000, seed=1, chunk_size=1000))


def test_sir_histogram(pair) -> None:
    weights = pair.oracle_weights()
    model = ResampledModel(pair.sample_model, pair.weight_fn(weights), particles=5)
    frame = sir_histogram(sir_sample_many(model, 1000, seed=2), pair, weights)
    assert list(frame.columns) == ["symbol", "count", "frequency", "induced"]
    assert frame["count"].sum() == 1000
    assert frame["induced"].tolist() == pytest.approx(pair.p.tolist())


def test_exact_sir_density() -> None:
    small = DiscreteDistributionPair([0.9, 0.1], [0.5, 0.5])
    assert exact_sir_density(small, [1.8, 0.2], 2) == pytest.approx([0.7, 0.3])
    assert exact_sir_density(small, [1.8, 0.2], 1) == pytest.approx([0.5, 0.5])
    assert exact_sir_density(small, [1.8, 0.2], 3).sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        exact_sir_density(small, [1.8, 0.2], 4)


def test_sir_density_matches_enumeration(pair) -> None:
    weights = np.array([2.0, 1.0, 0.5])
    model = ResampledModel(pair.sample_model, pair.weight_fn(weights), particles=3)
    exact = exact_sir_density(pair, weights, 3)
    for symbol in range(3):
        estimate = sir_density(model, [float(symbol)], pair.model_density, n_outer=20_000, seed=symbol)
        assert abs(estimate.value - exact[symbol]) < 5 * estimate.stderr + 1e-9
    base = ResampledModel(pair.sample_model, pair.weight_fn(weights), particles=1)
    assert sir_density(base, [1.0], pair.model_density, n_outer=3, seed=0).value == pytest.approx(0.3)


def test_partition_and_expectation(pair) -> None:
    unit = ResampledModel(pair.sample_model, lambda x: np.ones(len(x)), particles=10)
    estimate = estimate_partition(unit, 100, seed=0)
    assert estimate.z_hat == pytest.approx(1.0)
    assert estimate.stderr == 0.0
    oracle = ResampledModel(pair.sample_model, pair.weight_fn(), particles=10)
    assert abs(estimate_partition(oracle, 50_000, seed=0).z_hat - 1.0) < 0.03
    assert 0.0 <= sir_expectation(oracle, lambda x: x[:, 0], seed=0) <= 2.0


def test_sir_expectation_accepts_point_statistics() -> None:
    def square_batch(n, rng):
        return np.array([[1.0, 10.0], [3.0, 30.0]])

    model = ResampledModel(square_batch, lambda x: np.array([1.0, 3.0]), particles=2)
    assert sir_expectation(model, lambda x: x[0], seed=0) == pytest.approx(2.5)
    assert sir_expectation(model, lambda x: x[:, 1], seed=0) == pytest.approx(25.0)


def test_all_zero_particle_sets_raise(pair) -> None:
    model = ResampledModel(pair.sample_model, lambda x: np.zeros(len(x)), particles=4)
    with pytest.raises(NumericalError):
        sir_sample_many(model, 10, seed=0)
    with pytest.raises(ValueError):
        ResampledModel(pair.sample_model, pair.weight_fn(), particles=0)
