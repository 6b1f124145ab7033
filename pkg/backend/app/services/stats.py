"""
Numerical statistics: the skew normal law SN(lambda) with density
2 phi(x) Phi(lambda x), adaptive quadrature, empirical welfare distributions,
Kolmogorov-Smirnov distance and a first-order stochastic dominance test.

lambda = +inf / -inf are first-class: they are the half-normal laws on the
positive / negative half-line.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from app.core.exceptions import DomainError, QuadratureError

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# phi(x) underflows to 0 beyond this, so [-SN_TAIL, SN_TAIL] carries all the mass
SN_TAIL = 40.0
QUAD_LIMIT = 200


# ===========================================================
#              QUADRATURE
# ===========================================================

def quadrature(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    points: Iterable[float] = (),
) -> float:
    """Adaptive Gauss-Kronrod quadrature of f over [a, b].

    `points` are known discontinuities (jumps of step rules, kinks); the
    interval is split there before refinement. Raises QuadratureError with the
    best estimate attached when the error bound stays above `tol`.
    """
    if a == b:
        return 0.0
    if b < a:
        return -quadrature(f, b, a, tol, points)

    inner = sorted({p for p in points if a < p < b})
    result = integrate.quad(
        f,
        a,
        b,
        points=inner or None,
        epsabs=tol,
        epsrel=0.0,
        limit=max(QUAD_LIMIT, 4 * len(inner) + 50),
        full_output=1,
    )
    value, error = result[0], result[1]
    if len(result) > 3 and error > tol:
        raise QuadratureError(f"quadrature did not converge on [{a}, {b}]: {result[3]}", value, error)
    return value


# ===========================================================
#              SKEW NORMAL
# ===========================================================

@dataclass(frozen=True)
class SkewNormal:
    shape: float

    @property
    def is_half_normal(self) -> bool:
        return math.isinf(self.shape)


def _pdf(shape: float, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    phi = np.exp(-0.5 * x * x) * INV_SQRT_2PI
    if math.isinf(shape):
        side = np.sign(x) * math.copysign(1.0, shape)
        # density of the half-normal; the boundary point takes the midpoint value
        return np.where(side > 0, 2.0 * phi, np.where(side == 0, phi, 0.0))
    return 2.0 * phi * ndtr(shape * x)


def sn_pdf(sn: SkewNormal, x: float) -> float:
    return float(_pdf(sn.shape, np.asarray(x)))


def _half_normal_cdf(shape: float, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if shape > 0:
        return np.where(x > 0, 2.0 * ndtr(x) - 1.0, 0.0)
    return np.where(x < 0, 2.0 * ndtr(x), 1.0)


def sn_cdf(sn: SkewNormal, x: float, tol: float = 1e-12) -> float:
    """H(x; lambda) by quadrature of the density.

    The integral runs over the shorter tail so values near 0 and near 1 keep
    the same absolute accuracy.
    """
    if sn.is_half_normal:
        return float(_half_normal_cdf(sn.shape, np.asarray(x)))
    if x <= -SN_TAIL:
        return 0.0
    if x >= SN_TAIL:
        return 1.0
    pdf = lambda y: float(_pdf(sn.shape, y))
    if x <= 0:
        return min(1.0, max(0.0, quadrature(pdf, -SN_TAIL, x, tol)))
    return min(1.0, max(0.0, 1.0 - quadrature(pdf, x, SN_TAIL, tol, points=(0.0,))))


def sn_mean(sn: SkewNormal) -> float:
    if sn.is_half_normal:
        return math.copysign(SQRT_2_OVER_PI, sn.shape)
    return SQRT_2_OVER_PI * sn.shape / math.sqrt(1.0 + sn.shape * sn.shape)


def sn_expectation(sn: SkewNormal, f: Callable[[float], float], tol: float = 1e-10, points: Iterable[float] = ()) -> float:
    """E[f(W)] for W ~ SN(lambda); `points` are jumps of f."""
    pdf = lambda y: f(y) * float(_pdf(sn.shape, y))
    return quadrature(pdf, -SN_TAIL, SN_TAIL, tol, points=set(points) | {0.0})


def cdf_table(sn: SkewNormal, lo: float = -10.0, hi: float = 10.0, points: int = 4001) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized CDF for bulk evaluation (KS over large samples).

    The density is integrated segment by segment on a uniform grid and the
    cumulative values are interpolated linearly; outside [lo, hi] the CDF is
    clamped to its end values.
    """
    if sn.is_half_normal:
        return lambda x: _half_normal_cdf(sn.shape, x)
    grid = np.linspace(lo, hi, points)
    pdf = lambda y: float(_pdf(sn.shape, y))
    cumulative = np.empty(points)
    cumulative[0] = sn_cdf(sn, lo)
    for k in range(1, points):
        cumulative[k] = cumulative[k - 1] + quadrature(pdf, grid[k - 1], grid[k], 1e-13)
    np.clip(cumulative, 0.0, 1.0, out=cumulative)
    return lambda x: np.interp(np.asarray(x, dtype=float), grid, cumulative)


@dataclass(frozen=True)
class MonotoneReport:
    passed: bool
    violations: Tuple[Tuple[float, float, float, float], ...] = ()  # (x, lambda_lo, lambda_hi, diff)


def sn_cdf_monotone_check(lambda_grid: Sequence[float], x_grid: Sequence[float], tol: float = 1e-12) -> MonotoneReport:
    """Verify H(x; lambda) decreases in lambda at each x of the grid."""
    lambdas = sorted(lambda_grid)
    violations = []
    for x in x_grid:
        values = [sn_cdf(SkewNormal(lam), x) for lam in lambdas]
        for (lam_lo, h_lo), (lam_hi, h_hi) in zip(zip(lambdas, values), zip(lambdas[1:], values[1:])):
            diff = h_hi - h_lo
            if diff >= tol:
                violations.append((float(x), lam_lo, lam_hi, diff))
    return MonotoneReport(passed=not violations, violations=tuple(violations))


# ===========================================================
#              EMPIRICAL WELFARE
# ===========================================================

@dataclass(frozen=True, eq=False)
class EmpiricalWelfare:
    """Sorted sample of welfare values with right-continuous CDF queries.

    `counts` is set for histogram sketches (values are then the right bin
    edges); `resolution` is the extra CDF tolerance such a sketch carries.
    """

    values: np.ndarray
    counts: Optional[np.ndarray] = None
    meta: Dict[str, Any] = field(default_factory=dict)
    resolution: float = 0.0

    @classmethod
    def from_samples(cls, samples: Sequence[float], meta: Optional[Dict[str, Any]] = None) -> "EmpiricalWelfare":
        values = np.sort(np.asarray(samples, dtype=float))
        if values.size < 1:
            raise DomainError("empirical distribution needs at least one sample")
        return cls(values=values, meta={"count": int(values.size), **(meta or {})})

    @classmethod
    def from_histogram(cls, edges: np.ndarray, counts: np.ndarray, meta: Optional[Dict[str, Any]] = None, resolution: float = 1e-3) -> "EmpiricalWelfare":
        counts = np.asarray(counts, dtype=np.int64)
        keep = counts > 0
        if not keep.any():
            raise DomainError("empirical distribution needs at least one sample")
        return cls(
            values=np.asarray(edges[1:], dtype=float)[keep],
            counts=counts[keep],
            meta={"count": int(counts.sum()), **(meta or {})},
            resolution=resolution,
        )

    @property
    def count(self) -> int:
        return int(self.values.size if self.counts is None else self.counts.sum())

    def _cumulative(self) -> np.ndarray:
        if self.counts is None:
            return np.arange(1, self.values.size + 1, dtype=float)
        return np.cumsum(self.counts).astype(float)

    def steps(self) -> Tuple[np.ndarray, np.ndarray]:
        """Distinct values and the CDF just after each of them."""
        cumulative = self._cumulative() / self.count
        last = np.ones(self.values.size, dtype=bool)
        last[:-1] = self.values[1:] != self.values[:-1]
        return self.values[last], cumulative[last]

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        cumulative = np.concatenate(([0.0], self._cumulative() / self.count))
        return cumulative[np.searchsorted(self.values, x, side="right")]

    def expect(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        fx = np.asarray(f(self.values), dtype=float)
        if self.counts is None:
            return float(fx.mean())
        return float(np.dot(fx, self.counts) / self.count)

    def mean(self) -> float:
        return self.expect(lambda v: v)


def _evaluate(cdf: Callable, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(cdf(x), dtype=float)
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(cdf(v)) for v in x])


def ks_distance(emp: EmpiricalWelfare, cdf: Callable) -> float:
    """sup |F_emp - cdf|, checked on both sides of every step."""
    values, after = emp.steps()
    before = np.concatenate(([0.0], after[:-1]))
    target = _evaluate(cdf, values)
    return float(max(np.max(after - target), np.max(target - before), 0.0))


class Dominance(str, Enum):
    DOMINATES = "dominates"
    DOMINATED = "dominated"
    INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class DominanceReport:
    verdict: Dominance
    statistically_equal: bool
    slack: float
    max_excess: float  # max over x of F_a(x) - F_b(x)
    max_deficit: float  # max over x of F_b(x) - F_a(x)

    @property
    def label(self) -> str:
        if self.statistically_equal:
            return "incomparable (statistically equal)"
        return self.verdict.value


def dominance_test(emp_a: EmpiricalWelfare, emp_b: EmpiricalWelfare, alpha: float = 0.01) -> DominanceReport:
    """First-order dominance of a over b (F_a <= F_b everywhere) with a two-sample DKW band."""
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    log_term = math.log(2.0 / alpha)
    slack = (
        math.sqrt(log_term / (2.0 * emp_a.count))
        + math.sqrt(log_term / (2.0 * emp_b.count))
        + emp_a.resolution
        + emp_b.resolution
    )
    # both CDFs are right-continuous steps, so the merged support is enough
    support = np.union1d(emp_a.values, emp_b.values)
    gap = emp_a.cdf(support) - emp_b.cdf(support)
    max_excess, max_deficit = float(gap.max()), float((-gap).max())
    a_over_b = max_excess <= slack
    b_over_a = max_deficit <= slack

    if a_over_b and b_over_a:
        verdict, equal = Dominance.INCOMPARABLE, True
    elif a_over_b:
        verdict, equal = Dominance.DOMINATES, False
    elif b_over_a:
        verdict, equal = Dominance.DOMINATED, False
    else:
        verdict, equal = Dominance.INCOMPARABLE, False
    return DominanceReport(verdict, equal, slack, max_excess, max_deficit)


def dominates(emp_a: EmpiricalWelfare, emp_b: EmpiricalWelfare, alpha: float = 0.01) -> Dominance:
    return dominance_test(emp_a, emp_b, alpha).verdict
