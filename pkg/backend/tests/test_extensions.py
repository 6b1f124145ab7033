import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import DomainError
from app.models.models import (
    IndepModel,
    IntensityModel,
    MarginDistribution,
    NoiseDistribution,
    RepresentationRule,
    Society,
    WeightAllocation,
)
from app.services import extensions
from app.services.engine import SimulationSpec, simulate
from app.services.stats import SkewNormal, cdf_table, ks_distance

UNIFORM = MarginDistribution(kind="uniform")
WTA = RepresentationRule(kind="winner_take_all")
PR = RepresentationRule(kind="proportional")
IDENTITY = IntensityModel(theta=UNIFORM, noise=NoiseDistribution(kind="uniform"))


# ===== Preference intensities =====

def test_identity_reduction_is_bit_identical():
    society = Society(sizes=(4.0, 1.0, 3.0, 2.0))
    alloc = WeightAllocation(weights=(2.0, 1.0, 1.0, 1.0))
    spec = SimulationSpec(society=society, alloc=alloc, rule=WTA, margin=UNIFORM, samples=10_000, seed=77)
    correlated = simulate(spec)
    intensity = extensions.simulate_intensity(IDENTITY, society, alloc, WTA, samples=10_000, seed=77)
    assert intensity.model == "intensity"
    assert intensity.sigma == correlated.sigma
    assert np.array_equal(intensity.w_samples, correlated.w_samples)


def test_rho_intensity_identity_case():
    assert extensions.rho_intensity(IDENTITY, WTA) == pytest.approx(math.sqrt(3.0) / 2.0, abs=1e-9)
    assert extensions.rho_intensity(IDENTITY, PR) == pytest.approx(1.0, abs=1e-10)


def test_steep_noise_behaves_like_sign():
    model = IntensityModel(theta=UNIFORM, noise=NoiseDistribution(kind="uniform", bound=1e-6))
    assert abs(extensions.rho_intensity(model, WTA) - 1.0) < 1e-3


def test_noise_margins():
    x = np.linspace(-1.0, 1.0, 21)
    beta_one = NoiseDistribution(kind="symmetric_beta", alpha=1.0)
    np.testing.assert_allclose(extensions.noise_margin(beta_one, x), x, atol=1e-12)
    wide = NoiseDistribution(kind="uniform", bound=2.0)
    np.testing.assert_allclose(extensions.noise_margin(wide, x), x / 2.0)
    table = NoiseDistribution(kind="tabulated", points=(0.5, 1.0), cdf=(0.9, 1.0))
    assert float(extensions.noise_cdf(table, 0.25)) == pytest.approx(0.7)
    assert float(extensions.noise_cdf(table, -0.25)) == pytest.approx(0.3)
    assert float(extensions.noise_cdf(table, 3.0)) == pytest.approx(1.0)
    assert float(extensions.noise_cdf(table, 0.0)) == pytest.approx(0.5)


def test_intensity_second_moment_by_quadrature():
    beta_one = IntensityModel(theta=UNIFORM, noise=NoiseDistribution(kind="symmetric_beta", alpha=1.0))
    assert extensions.intensity_second_moment(beta_one) == pytest.approx(1.0 / 3.0, abs=1e-9)
    half = IntensityModel(theta=UNIFORM, noise=NoiseDistribution(kind="uniform", bound=0.5))
    # 2 * int_0^1 0.5 * min(4 t^2, 1) dt
    assert extensions.intensity_second_moment(half) == pytest.approx(2.0 / 3.0, abs=1e-9)


def test_intensity_single_group_never_inverts():
    model = IntensityModel(theta=UNIFORM, noise=NoiseDistribution(kind="symmetric_beta", alpha=2.0))
    result = extensions.simulate_intensity(
        model, Society(sizes=(3.0,)), WeightAllocation(weights=(1.0,)), WTA, samples=5_000, seed=1
    )
    assert result.estimates.p_hat == 0.0


def test_intensity_rejects_zero_samples():
    with pytest.raises(DomainError):
        extensions.simulate_intensity(IDENTITY, Society(sizes=(1.0,)), WeightAllocation(weights=(1.0,)), WTA, samples=0, seed=1)


# ===== Independent preferences =====

def test_indep_model_rule_restriction():
    with pytest.raises(ValidationError):
        IndepModel(sizes=(1.0, 2.0), rule=RepresentationRule(kind="step", breakpoints=(0.5,), values=(1.0,)))


def test_indep_single_group_is_half_normal():
    result = extensions.simulate_indep(IndepModel(sizes=(7.0,), rule=WTA), [1.0], samples=20_000, seed=4)
    assert result.model == "independent"
    assert result.estimates.p_hat == 0.0
    assert np.all(result.w_samples >= 0.0)
    assert ks_distance(result.welfare, cdf_table(SkewNormal(math.inf))) < 1.95 / math.sqrt(20_000)


def test_indep_weights_must_align():
    with pytest.raises(DomainError):
        extensions.simulate_indep(IndepModel(sizes=(1.0, 2.0), rule=WTA), [1.0], samples=10, seed=0)


def test_indep_proportional_rule_is_skew_normal_at_every_n():
    rng = np.random.default_rng(2024)
    sizes = rng.uniform(1.0, 10.0, size=5)
    weights = rng.uniform(0.5, 5.0, size=5)
    model = IndepModel(sizes=tuple(sizes.tolist()), rule=PR)
    m = 100_000
    result = extensions.simulate_indep(model, weights.tolist(), samples=m, seed=12)
    lam = extensions.indep_lambda(model, weights.tolist())
    assert ks_distance(result.welfare, cdf_table(SkewNormal(lam))) < 1.95 / math.sqrt(m)


def test_indep_proportional_with_sqrt_weights_never_inverts():
    sizes = (1.0, 4.0, 9.0)
    model = IndepModel(sizes=sizes, rule=PR)
    assert extensions.indep_lambda(model, sizes) == math.inf
    result = extensions.simulate_indep(model, list(sizes), samples=20_000, seed=6)
    assert result.estimates.p_hat == 0.0


def test_indep_wta_equal_groups_near_limit():
    n = 201
    model = IndepModel(sizes=(1.0,) * n, rule=WTA)
    result = extensions.simulate_indep(model, [1.0] * n, samples=20_000, seed=8)
    assert abs(result.estimates.p_hat - extensions.indep_asymptotic_p(1.0)) <= 0.015


def test_indep_wta_correlation_of_margins():
    n = 300
    model = IndepModel(sizes=(1.0,) * n, rule=WTA)
    result = extensions.simulate_indep(model, [1.0] * n, samples=20_000, seed=21, keep_weight_margin=True)
    corr = float(np.corrcoef(result.s_samples, result.t_samples)[0, 1])
    assert corr == pytest.approx(extensions.indep_correlation(model, [1.0] * n), abs=0.02)
    assert extensions.indep_correlation(model, [1.0] * n) == pytest.approx(math.sqrt(2.0 / math.pi))


def test_finite_population_mode_approaches_the_limit():
    sizes = (1.0, 2.0, 3.0, 2.0, 1.0)
    weights = [1.0] * 5
    limit = extensions.simulate_indep(IndepModel(sizes=sizes, rule=PR), weights, samples=20_000, seed=5)
    finite_model = IndepModel(sizes=sizes, rule=PR, population_scale=400.0)
    finite = extensions.simulate_indep(finite_model, weights, samples=20_000, seed=5)
    assert extensions.ballot_counts(finite_model).tolist() == [400, 800, 1200, 800, 400]
    assert finite.sums[4] / finite.samples == pytest.approx(1.0, abs=0.05)
    assert finite.estimates.p_hat == pytest.approx(limit.estimates.p_hat, abs=0.02)


def test_ballot_counts_need_a_scale():
    with pytest.raises(DomainError):
        extensions.ballot_counts(IndepModel(sizes=(1.0,), rule=WTA))


def test_indep_asymptotic_p():
    assert extensions.indep_asymptotic_p(0.0) == pytest.approx(0.5)
    assert extensions.indep_asymptotic_p(1.0) == pytest.approx(0.2060, abs=1e-3)
    grid = [extensions.indep_asymptotic_p(c) for c in np.linspace(0.0, 1.0, 21)]
    assert all(b < a for a, b in zip(grid, grid[1:]))
    with pytest.raises(DomainError):
        extensions.indep_asymptotic_p(1.2)
