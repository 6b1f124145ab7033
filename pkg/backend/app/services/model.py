# backend/app/services/model.py
"""
Evaluation primitives for the domain types in app.models.models: rule
validation and evaluation, weight materialization, margin sampling and the
moments / atoms of margin distributions.
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps

from app.core.exceptions import DomainError
from app.models.models import MarginDistribution, RepresentationRule, SizeDistribution, Society, WeightAllocation


@dataclass(frozen=True)
class RuleViolation:
    code: str
    message: str


# ===========================================================
#              REPRESENTATION RULES
# ===========================================================

def validate_rule(rule: RepresentationRule) -> List[RuleViolation]:
    """Check oddness, monotonicity and non-nullity; an empty list means valid.

    Named rules are valid analytically. Step rules are odd by construction,
    so only the table is inspected.
    """
    if rule.kind != "step":
        return []

    violations: List[RuleViolation] = []
    bps, vals = rule.breakpoints, rule.values
    if not bps or len(bps) != len(vals):
        violations.append(RuleViolation("shape", "step rule needs breakpoints and values of equal nonzero length"))
        return violations

    if any(not 0 <= b <= 1 for b in bps):
        violations.append(RuleViolation("domain", "breakpoints must lie in [0, 1]"))
    if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
        violations.append(RuleViolation("order", "breakpoints must be strictly increasing"))
    if any(not -1 <= v <= 1 for v in vals):
        violations.append(RuleViolation("range", "values must lie in [-1, 1]"))
    # r(0) = 0 and r nondecreasing force r >= 0 on (0, 1]
    if any(v < 0 for v in vals):
        violations.append(RuleViolation("monotonicity", "values on (0, 1] must be nonnegative"))
    for (b1, v1), (b2, v2) in zip(zip(bps, vals), zip(bps[1:], vals[1:])):
        if v2 < v1:
            violations.append(RuleViolation("monotonicity", f"value decreases from {v1} at {b1} to {v2} at {b2}"))
    if all(v == 0 for v in vals):
        violations.append(RuleViolation("null", "rule is identically zero"))
    return violations


def rule_values(rule: RepresentationRule, x: np.ndarray) -> np.ndarray:
    """Vectorized r(x); no domain check."""
    x = np.asarray(x, dtype=float)
    if rule.kind == "winner_take_all":
        return np.sign(x)
    if rule.kind == "proportional":
        return x.copy()
    table = np.concatenate(([0.0], np.asarray(rule.values, dtype=float)))
    idx = np.searchsorted(np.asarray(rule.breakpoints, dtype=float), np.abs(x), side="right")
    return np.sign(x) * table[idx]


def eval_rule(rule: RepresentationRule, x: float) -> float:
    if not -1.0 <= x <= 1.0:
        raise DomainError(f"rule argument must lie in [-1, 1], got {x}")
    return float(rule_values(rule, np.asarray(x)))


def exact_rule_value(rule: RepresentationRule, x: Fraction) -> Fraction:
    """r(x) in rational arithmetic; table values are read as exact decimals."""
    if x == 0:
        return Fraction(0)
    sign = 1 if x > 0 else -1
    if rule.kind == "winner_take_all":
        return Fraction(sign)
    if rule.kind == "proportional":
        return x
    value = Fraction(0)
    for b, v in zip(rule.breakpoints, rule.values):
        if abs(x) >= Fraction(str(b)):
            value = Fraction(str(v))
    return sign * value


# ===========================================================
#              WEIGHT ALLOCATIONS
# ===========================================================

def law_values(alloc: WeightAllocation, sizes: np.ndarray) -> np.ndarray:
    """Evaluate the allocation's law a(s) elementwise, clipped to [0, weight_bound]."""
    s = np.asarray(sizes, dtype=float)
    if alloc.law == "proportional":
        out = s.copy()
    elif alloc.law == "constant":
        out = np.ones_like(s)
    elif alloc.law == "power":
        out = np.power(s, alloc.gamma)
    elif alloc.law == "table":
        table = np.concatenate(([0.0], np.asarray(alloc.values, dtype=float)))
        out = table[np.searchsorted(np.asarray(alloc.edges, dtype=float), s, side="right")]
    else:
        raise DomainError("allocation has no law")
    if alloc.weight_bound is not None:
        out = np.clip(out, 0.0, alloc.weight_bound)
    return out


def materialize_weights(society: Society, alloc: WeightAllocation) -> List[float]:
    if alloc.is_explicit:
        if len(alloc.weights) != society.n:
            raise DomainError(f"allocation has {len(alloc.weights)} weights for {society.n} groups")
        return list(alloc.weights)

    weights = law_values(alloc, np.asarray(society.sizes))
    if not np.any(weights > 0):
        raise DomainError(f"law '{alloc.law}' gives zero weight to every group")
    return weights.tolist()


# ===========================================================
#              MARGIN DISTRIBUTIONS
# ===========================================================

def make_stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, *keys)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))


def second_moment(dist: MarginDistribution) -> float:
    if dist.kind == "rademacher":
        return 1.0
    if dist.kind == "uniform":
        return 1.0 / 3.0
    if dist.kind == "symmetric_beta":
        # Var(2B - 1) = 4 * alpha^2 / ((2 alpha)^2 (2 alpha + 1))
        return 1.0 / (2.0 * dist.alpha + 1.0)
    return math.fsum(p * x * x for x, p in zip(dist.points, dist.probabilities))


def margin_atoms(dist: MarginDistribution) -> Tuple[np.ndarray, np.ndarray]:
    """Mirrored support and probabilities of a discrete margin, ascending."""
    if dist.kind == "rademacher":
        return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
    if dist.kind != "discrete_symmetric":
        raise DomainError(f"'{dist.kind}' margins have no finite support")
    atoms = {}
    for x, p in zip(dist.points, dist.probabilities):
        if p == 0:
            continue
        if x == 0:
            atoms[0.0] = atoms.get(0.0, 0.0) + p
        else:
            atoms[-x] = atoms.get(-x, 0.0) + p / 2
            atoms[x] = atoms.get(x, 0.0) + p / 2
    values = np.array(sorted(atoms))
    return values, np.array([atoms[v] for v in values])


def exact_margin_atoms(dist: MarginDistribution) -> Optional[List[Tuple[Fraction, Fraction]]]:
    """Rational atoms, or None when the probabilities are not exact decimals summing to 1."""
    if dist.kind == "rademacher":
        half = Fraction(1, 2)
        return [(Fraction(-1), half), (Fraction(1), half)]
    if dist.kind != "discrete_symmetric":
        return None
    probs = [Fraction(str(p)) for p in dist.probabilities]
    if sum(probs) != 1:
        return None
    atoms = {}
    for x, p in zip(dist.points, probs):
        if p == 0:
            continue
        fx = Fraction(str(x))
        if fx == 0:
            atoms[fx] = atoms.get(fx, Fraction(0)) + p
        else:
            atoms[-fx] = atoms.get(-fx, Fraction(0)) + p / 2
            atoms[fx] = atoms.get(fx, Fraction(0)) + p / 2
    return [(v, atoms[v]) for v in sorted(atoms)]


def margin_pdf(dist: MarginDistribution) -> Callable[[float], float]:
    if dist.kind == "uniform":
        return lambda x: 0.5 if -1.0 <= x <= 1.0 else 0.0
    if dist.kind == "symmetric_beta":
        law = sps.beta(dist.alpha, dist.alpha)
        return lambda x: 0.5 * float(law.pdf((x + 1.0) / 2.0))
    raise DomainError(f"'{dist.kind}' margins are discrete")


def draw_margins(dist: MarginDistribution, rng: np.random.Generator, shape) -> np.ndarray:
    if dist.kind == "rademacher":
        return rng.integers(0, 2, size=shape) * 2.0 - 1.0
    if dist.kind == "uniform":
        return rng.uniform(-1.0, 1.0, size=shape)
    if dist.kind == "symmetric_beta":
        return 2.0 * rng.beta(dist.alpha, dist.alpha, size=shape) - 1.0
    values, probs = margin_atoms(dist)
    return values[rng.choice(len(values), size=shape, p=probs)]


def sample_margin(dist: MarginDistribution, stream: np.random.Generator) -> float:
    return float(draw_margins(dist, stream, None))


def integer_valued(values: Sequence[float]) -> bool:
    return all(float(v).is_integer() for v in values)


# ===========================================================
#              SOCIETIES
# ===========================================================

SOCIETY_STREAM = 0x50C1E7


def draw_society(limit_dist: SizeDistribution, n: int, seed: int, size_bound: Optional[float] = None) -> Society:
    """n group sizes drawn i.i.d. from the limiting size distribution."""
    if n < 1:
        raise DomainError(f"a society needs at least one group, got n={n}")
    rng = make_stream(seed, SOCIETY_STREAM, n)
    support = np.asarray(limit_dist.support, dtype=float)
    sizes = support[rng.choice(support.size, size=n, p=np.asarray(limit_dist.probabilities))]
    return Society(sizes=tuple(sizes.tolist()), size_bound=size_bound, limit_dist=limit_dist)


def repeat_pattern(pattern: Sequence[float], n: int, size_bound: Optional[float] = None) -> Society:
    """First n entries of the pattern repeated cyclically."""
    if n < 1 or not pattern:
        raise DomainError("a society needs at least one group and a nonempty pattern")
    sizes = [float(pattern[i % len(pattern)]) for i in range(n)]
    return Society(sizes=tuple(sizes), size_bound=size_bound)
