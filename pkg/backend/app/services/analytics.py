"""
Proportionality indices and closed-form asymptotics.

rho = Corr(X, r(X)) scales how much proportionality matters; the welfare
limit is SN(lambda_a) with lambda_a = rho c* / sqrt(1 - rho^2 c*^2), from
which the limits of expected welfare u, mean majority deficit delta and
inversion probability p follow.
"""
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import DomainError
from app.models.models import MarginDistribution, RepresentationRule, SizeDistribution, WeightAllocation
from app.services.model import law_values, margin_atoms, margin_pdf, rule_values, second_moment
from app.services.stats import SQRT_2_OVER_PI, SkewNormal, quadrature, sn_expectation

BOUNDARY_TOL = 1e-14

RhoMethod = Literal["auto", "closed_form", "quadrature"]


# ===========================================================
#              CORRELATION rho
# ===========================================================

def _rho_closed_form(dist: MarginDistribution, rule: RepresentationRule) -> Optional[float]:
    if rule.kind == "proportional":
        return 1.0
    if dist.kind == "rademacher":
        # X = +-1, so r(X) = r(1) X
        return 1.0 if rule_values(rule, np.asarray(1.0)) > 0 else None
    if dist.kind == "uniform" and rule.kind == "winner_take_all":
        # E|X| = 1/2, E[X^2] = 1/3
        return 0.5 / math.sqrt(1.0 / 3.0)
    if dist.kind == "uniform" and rule.kind == "step":
        edges = list(rule.breakpoints) + [1.0]
        cross = math.fsum(v * (hi * hi - lo * lo) / 2.0 for v, lo, hi in zip(rule.values, edges, edges[1:]))
        square = math.fsum(v * v * (hi - lo) for v, lo, hi in zip(rule.values, edges, edges[1:]))
        if square <= 0:
            return None
        return cross / math.sqrt(second_moment(dist) * square)
    return None


def even_moment(dist: MarginDistribution, g, jumps, tol: float) -> float:
    """E[g(X)] for an even integrand g, exact on discrete margins."""
    if dist.is_discrete:
        values, probs = margin_atoms(dist)
        return math.fsum(probs * g(values))
    pdf = margin_pdf(dist)
    # integrate over [0, 1] and double
    return 2.0 * quadrature(lambda x: float(g(np.asarray(x))) * pdf(x), 0.0, 1.0, tol, [p for p in jumps if p > 0])


def rule_second_moment(dist: MarginDistribution, rule: RepresentationRule, tol: float = 1e-12) -> float:
    """E[r(X)^2]."""
    return even_moment(dist, lambda x: rule_values(rule, x) ** 2, rule.jump_points, tol)


def _rho_by_integration(dist: MarginDistribution, rule: RepresentationRule, tol: float) -> float:
    cross = even_moment(dist, lambda x: x * rule_values(rule, x), rule.jump_points, tol)
    square = rule_second_moment(dist, rule, tol)
    if square <= 0:
        raise DomainError("E[r(X)^2] = 0: the rule vanishes on the margin support")
    return cross / math.sqrt(second_moment(dist) * square)


def rho(dist: MarginDistribution, rule: RepresentationRule, method: RhoMethod = "auto", tol: float = 1e-12) -> float:
    value = None
    if method in ("auto", "closed_form"):
        value = _rho_closed_form(dist, rule)
        if value is None and method == "closed_form":
            raise DomainError(f"no closed form for rho({dist.kind}, {rule.kind})")
    if value is None:
        value = _rho_by_integration(dist, rule, tol)
    if value <= 0:
        raise DomainError(f"rho = {value} <= 0; the rule is not a valid representation rule")
    return min(value, 1.0)


# ===========================================================
#              PROPORTIONALITY INDICES
# ===========================================================

def _pair(sizes: Sequence[float], weights: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(sizes, dtype=float)
    a = np.asarray(weights, dtype=float)
    if s.shape != a.shape or s.ndim != 1 or s.size == 0:
        raise DomainError("sizes and weights must be nonempty lists of equal length")
    return s, a


def cosine(sizes: Sequence[float], weights: Sequence[float]) -> float:
    """Cosine of the angle between the size and weight vectors."""
    s, a = _pair(sizes, weights)
    norm = math.sqrt(math.fsum(s * s) * math.fsum(a * a))
    if norm == 0:
        raise DomainError("zero-norm size or weight vector")
    return min(1.0, math.fsum(s * a) / norm)


def sqrt_cosine(sizes: Sequence[float], weights: Sequence[float]) -> float:
    """Cosine between sqrt(sizes) and the weights: sum sqrt(s) a / sqrt(sum s * sum a^2)."""
    s, a = _pair(sizes, weights)
    norm = math.sqrt(math.fsum(s) * math.fsum(a * a))
    if norm == 0:
        raise DomainError("zero-norm size or weight vector")
    return min(1.0, math.fsum(np.sqrt(s) * a) / norm)


def hat_c_sqrt(sizes: Sequence[float], weights: Sequence[float]) -> float:
    """Cosine between sqrt(s_i) and a_i / sqrt(s_i): sum a / sqrt(sum s * sum a^2 / s)."""
    s, a = _pair(sizes, weights)
    if np.any(s <= 0):
        raise DomainError("sizes must be positive")
    norm = math.sqrt(math.fsum(s) * math.fsum(a * a / s))
    if norm == 0:
        raise DomainError("weights must not be all zero")
    return min(1.0, math.fsum(a) / norm)


def sainte_lague(sizes: Sequence[float], weights: Sequence[float]) -> float:
    """Sainte-Laguë disproportionality sum a_i^2 / s_i."""
    s, a = _pair(sizes, weights)
    if np.any(s <= 0):
        raise DomainError("sizes must be positive")
    return math.fsum(a * a / s)


def _support_moments(limit_dist: SizeDistribution, law: WeightAllocation) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if law.is_explicit:
        raise DomainError("limit indices need a weight law, not explicit weights")
    s = np.asarray(limit_dist.support, dtype=float)
    return s, law_values(law, s), np.asarray(limit_dist.probabilities, dtype=float)


def cosine_limit(limit_dist: SizeDistribution, law: WeightAllocation) -> float:
    s, a, p = _support_moments(limit_dist, law)
    norm = math.sqrt(math.fsum(p * s * s) * math.fsum(p * a * a))
    if norm == 0:
        raise DomainError("weight law vanishes on the support of the size distribution")
    return min(1.0, math.fsum(p * s * a) / norm)


def sqrt_cosine_limit(limit_dist: SizeDistribution, law: WeightAllocation) -> float:
    # both denominator factors are taken against the limiting distribution
    s, a, p = _support_moments(limit_dist, law)
    norm = math.sqrt(math.fsum(p * s) * math.fsum(p * a * a))
    if norm == 0:
        raise DomainError("weight law vanishes on the support of the size distribution")
    return min(1.0, math.fsum(p * np.sqrt(s) * a) / norm)


# ===========================================================
#              ASYMPTOTICS
# ===========================================================

def lambda_param(rho_value: float, c_star: float) -> float:
    product = rho_value * c_star
    if abs(abs(product) - 1.0) <= BOUNDARY_TOL or abs(product) > 1.0:
        return math.copysign(math.inf, product)
    return product / math.sqrt(1.0 - product * product)


@dataclass(frozen=True)
class AsymptoticProfile:
    rho: float
    c_star: float
    lam: float
    u_limit: float
    delta_limit: float
    p_limit: float

    def as_dict(self) -> dict:
        return {
            "rho": self.rho,
            "c_star": self.c_star,
            "lambda": self.lam,
            "u_limit": self.u_limit,
            "delta_limit": self.delta_limit,
            "p_limit": self.p_limit,
        }


def asymptotic_objectives(rho_value: float, c_star: float) -> AsymptoticProfile:
    product = max(-1.0, min(1.0, rho_value * c_star))
    u_limit = SQRT_2_OVER_PI * product
    return AsymptoticProfile(
        rho=rho_value,
        c_star=c_star,
        lam=lambda_param(rho_value, c_star),
        u_limit=u_limit,
        # E|S*| = sqrt(2/pi), so delta = (E|S*| - u) / 2 = (1 - rho c*) / sqrt(2 pi)
        delta_limit=(SQRT_2_OVER_PI - u_limit) / 2.0,
        p_limit=math.acos(product) / math.pi,
    )


# ===========================================================
#              EXPECTATION-FORM OBJECTIVES
# ===========================================================

@dataclass(frozen=True)
class ExpectationObjective:
    """E[f(W)] for a nondecreasing f with |f(w)| <= exp(alpha + beta w^2)."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    alpha: float = 1.0
    beta: float = 0.25
    jumps: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.alpha <= 0 or not 0 < self.beta < 1:
            raise DomainError("square exponential bound needs alpha > 0 and beta in (0, 1)")


EXPECTED_WELFARE = ExpectationObjective("expected_welfare", lambda w: np.asarray(w, dtype=float))
NEG_INVERSION = ExpectationObjective(
    "negative_inversion_probability",
    lambda w: -(np.asarray(w, dtype=float) < 0).astype(float),
    jumps=(0.0,),
)


def check_square_exponential_bound(objective: ExpectationObjective, grid: Iterable[float]) -> List[float]:
    """Grid points where |f(w)| > exp(alpha + beta w^2) or f decreases."""
    w = np.asarray(sorted(grid), dtype=float)
    fw = np.asarray(objective.f(w), dtype=float)
    failing = w[np.abs(fw) > np.exp(objective.alpha + objective.beta * w * w)]
    decreasing = w[1:][np.diff(fw) < 0]
    return sorted(set(failing.tolist()) | set(decreasing.tolist()))


def asymptotic_expectation(objective: ExpectationObjective, lam: float) -> float:
    """Limit of E[f(W)]: the expectation under SN(lambda)."""
    f = lambda x: float(objective.f(np.asarray(x)))
    return sn_expectation(SkewNormal(lam), f, points=objective.jumps)