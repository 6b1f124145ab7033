"""
Two variations on the correlated model, run through the same kernel.

Preference intensities: group i has common component Theta_i and each
member adds independent noise eps with CDF G_eps, so in a large group the
share of members preferring +1 gives a margin 2 G_eps(Theta_i) - 1 while
the representative still splits weight by r(Theta_i).

Independent preferences: every individual flips a fair coin, so the margin
of a group of size s_i is N_i / sqrt(s_i) with N_i standard normal (or an
actual binomial count in finite-population mode).
"""
import math
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from app.core.config import get_settings
from app.core.exceptions import DomainError
from app.models.models import IndepModel, IntensityModel, NoiseDistribution, RepresentationRule, Society, WeightAllocation
from app.services import analytics
from app.services.engine import SimulationResult, WelfareKernel, run_kernel
from app.services.model import draw_margins, materialize_weights, rule_values, second_moment
from app.services.stats import SQRT_2_OVER_PI


# ===========================================================
#              NOISE
# ===========================================================

def noise_margin(noise: NoiseDistribution, x) -> np.ndarray:
    """2 G_eps(x) - 1, vectorized."""
    x = np.asarray(x, dtype=float)
    if noise.kind == "uniform":
        return np.clip(x / noise.bound, -1.0, 1.0)
    if noise.kind == "symmetric_beta":
        z = np.clip(x / noise.bound, -1.0, 1.0)
        return 2.0 * sps.beta.cdf((z + 1.0) / 2.0, noise.alpha, noise.alpha) - 1.0
    grid = np.concatenate(([0.0], noise.points))
    values = np.concatenate(([0.5], noise.cdf))
    return np.sign(x) * (2.0 * np.interp(np.abs(x), grid, values) - 1.0)


def noise_cdf(noise: NoiseDistribution, x) -> np.ndarray:
    return (1.0 + noise_margin(noise, x)) / 2.0


def _noise_kinks(noise: NoiseDistribution) -> tuple:
    kinks = {noise.bound}
    if noise.kind == "tabulated":
        kinks |= set(noise.points)
    return tuple(sorted({k for k in kinks if 0 < k < 1} | {-k for k in kinks if 0 < k < 1}))


def intensity_second_moment(model: IntensityModel, tol: float = 1e-10) -> float:
    """E[(2 G_eps(Theta) - 1)^2]."""
    noise, theta = model.noise, model.theta
    if noise.kind == "uniform" and noise.bound >= 1.0:
        # Theta lies in [-1, 1], so the margin is Theta / bound
        return second_moment(theta) / (noise.bound * noise.bound)
    return analytics.even_moment(theta, lambda x: noise_margin(noise, x) ** 2, _noise_kinks(noise), tol)


def rho_intensity(model: IntensityModel, rule: RepresentationRule, tol: float = 1e-10) -> float:
    """Corr(2 G_eps(Theta) - 1, r(Theta))."""
    jumps = tuple(sorted(set(rule.jump_points) | set(_noise_kinks(model.noise))))
    cross = analytics.even_moment(model.theta, lambda x: noise_margin(model.noise, x) * rule_values(rule, x), jumps, tol)
    margin_sq = intensity_second_moment(model, tol)
    rule_sq = analytics.rule_second_moment(model.theta, rule, tol)
    if margin_sq <= 0 or rule_sq <= 0:
        raise DomainError("degenerate intensity model: a margin or rule moment vanishes")
    value = cross / math.sqrt(margin_sq * rule_sq)
    if value <= 0:
        raise DomainError(f"rho = {value} <= 0; the rule is not a valid representation rule")
    return min(value, 1.0)


def simulate_intensity(
    model: IntensityModel,
    society: Society,
    alloc: WeightAllocation,
    rule: RepresentationRule,
    samples: int,
    seed: int,
    chunk_size: Optional[int] = None,
    threads: Optional[int] = None,
    antithetic: bool = False,
    keep_weight_margin: bool = False,
    sample_cap: Optional[int] = None,
) -> SimulationResult:
    if samples < 1:
        raise DomainError("samples must be at least 1")
    sizes = np.asarray(society.sizes, dtype=float)
    weights = np.asarray(materialize_weights(society, alloc), dtype=float)
    n = sizes.size
    sigma = math.sqrt(intensity_second_moment(model) * math.fsum(sizes * sizes))
    tau = math.sqrt(analytics.rule_second_moment(model.theta, rule) * math.fsum(weights * weights)) if keep_weight_margin else 1.0
    kernel = WelfareKernel(
        model="intensity",
        sizes=sizes,
        weights=weights,
        sigma=sigma,
        tau=tau,
        draw=lambda rng, length: draw_margins(model.theta, rng, (length, n)),
        weight_margin=lambda x: rule_values(rule, x),
        vote_margin=lambda x: noise_margin(model.noise, x),
        discrete=model.theta.is_discrete,
    )
    return run_kernel(
        kernel,
        samples,
        seed,
        chunk_size or get_settings().chunk_size,
        threads=threads,
        antithetic=antithetic,
        keep_weight_margin=keep_weight_margin,
        sample_cap=sample_cap,
    )


# ===========================================================
#              INDEPENDENT PREFERENCES
# ===========================================================

def ballot_counts(model: IndepModel) -> np.ndarray:
    """Ballots per group in finite-population mode."""
    if model.population_scale is None:
        raise DomainError("model has no population_scale")
    counts = np.rint(model.population_scale * np.asarray(model.sizes, dtype=float))
    return np.maximum(1, counts).astype(np.int64)


def _indep_kernel(model: IndepModel, weights: np.ndarray) -> WelfareKernel:
    s = np.asarray(model.sizes, dtype=float)
    n = s.size
    wta = model.rule.kind == "winner_take_all"
    weight_margin = np.sign if wta else (lambda x: x)

    if model.population_scale is None:
        sigma = math.sqrt(math.fsum(s))
        r_sq = np.ones(n) if wta else 1.0 / s
        root = np.sqrt(s)
        draw = lambda rng, length: rng.standard_normal((length, n)) / root
        # sign votes put T on a lattice
        discrete = wta
    else:
        kappa = model.population_scale
        m = ballot_counts(model)
        # Var X_i = kappa / m_i, and X_i = 0 exactly on an even split
        var = kappa / m
        sigma = math.sqrt(math.fsum(s * s * var))
        even = np.where(m % 2 == 0, sps.binom.pmf(m // 2, m, 0.5), 0.0)
        r_sq = 1.0 - even if wta else var
        scale = math.sqrt(kappa) / m
        draw = lambda rng, length: (2.0 * rng.binomial(m, 0.5, size=(length, n)) - m) * scale
        discrete = True

    return WelfareKernel(
        model="independent",
        sizes=s,
        weights=weights,
        sigma=sigma,
        tau=math.sqrt(math.fsum(weights * weights * r_sq)),
        draw=draw,
        weight_margin=weight_margin,
        discrete=discrete,
    )


def simulate_indep(
    model: IndepModel,
    weights: Sequence[float],
    samples: int,
    seed: int,
    chunk_size: Optional[int] = None,
    threads: Optional[int] = None,
    antithetic: bool = False,
    keep_weight_margin: bool = False,
    sample_cap: Optional[int] = None,
) -> SimulationResult:
    if samples < 1:
        raise DomainError("samples must be at least 1")
    a = np.asarray(weights, dtype=float)
    if a.shape != (len(model.sizes),):
        raise DomainError(f"{a.size} weights for {len(model.sizes)} groups")
    if np.any(a < 0) or not np.any(a > 0):
        raise DomainError("weights must be nonnegative and not all zero")
    return run_kernel(
        _indep_kernel(model, a),
        samples,
        seed,
        chunk_size or get_settings().chunk_size,
        threads=threads,
        antithetic=antithetic,
        keep_weight_margin=keep_weight_margin,
        sample_cap=sample_cap,
    )


def indep_correlation(model: IndepModel, weights: Sequence[float]) -> float:
    """Corr(S / sigma, T / tau) in the large-population model."""
    if model.rule.kind == "proportional":
        return analytics.hat_c_sqrt(model.sizes, weights)
    return SQRT_2_OVER_PI * analytics.sqrt_cosine(model.sizes, weights)


def indep_lambda(model: IndepModel, weights: Sequence[float]) -> float:
    """Skew-normal shape of W: exact for every n under the proportional rule, the large-n limit under WTA."""
    return analytics.lambda_param(1.0, indep_correlation(model, weights))


def indep_asymptotic_p(c_sqrt_star: float) -> float:
    if not 0.0 <= c_sqrt_star <= 1.0:
        raise DomainError(f"c_sqrt_star must lie in [0, 1], got {c_sqrt_star}")
    return math.acos(SQRT_2_OVER_PI * c_sqrt_star) / math.pi
