# models.py
"""
Pydantic domain types: societies, weight allocations, representation rules
and the margin / noise distributions of the voting model.

All models are frozen. Construction validates the structural invariants;
rule monotonicity and oddness are reported by `validate_rule` instead of
raising, so a malformed rule can still be inspected.
"""
import math
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

PROB_TOL = 1e-12


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ===== Societies =====

class SizeDistribution(_Frozen):
    """Limiting size distribution: point masses on a finite support."""

    support: Tuple[float, ...] = Field(min_length=1)
    probabilities: Tuple[float, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _check(self):
        if len(self.support) != len(self.probabilities):
            raise ValueError("support and probabilities must have the same length")
        if any(p < 0 for p in self.probabilities):
            raise ValueError("probabilities must be nonnegative")
        if abs(math.fsum(self.probabilities) - 1.0) > PROB_TOL:
            raise ValueError("probabilities must sum to 1")
        if any(not math.isfinite(s) or s <= 0 for s in self.support):
            raise ValueError("support sizes must be positive and finite")
        return self


class Society(_Frozen):
    sizes: Tuple[float, ...] = Field(min_length=1)
    size_bound: Optional[float] = Field(default=None, gt=0)
    limit_dist: Optional[SizeDistribution] = None

    @model_validator(mode="after")
    def _check(self):
        bound = self.bound
        for i, s in enumerate(self.sizes):
            # zero-size groups are rejected: they break the 1/s_i terms
            if not math.isfinite(s) or s <= 0:
                raise ValueError(f"sizes[{i}] must be positive, got {s}")
            if s > bound:
                raise ValueError(f"sizes[{i}]={s} exceeds size_bound={bound}")
        return self

    @property
    def bound(self) -> float:
        return self.size_bound if self.size_bound is not None else max(self.sizes)

    @property
    def n(self) -> int:
        return len(self.sizes)


# ===== Weight allocations =====

WeightLaw = Literal["proportional", "constant", "power", "table"]


class WeightAllocation(_Frozen):
    """Explicit weights, or a named size-to-weight law a(s).

    Table laws are right-continuous: a(s) = values[j] for
    edges[j] <= s < edges[j+1]; sizes below edges[0] get weight 0.
    """

    weights: Optional[Tuple[float, ...]] = None
    law: Optional[WeightLaw] = None
    gamma: float = Field(default=1.0, ge=0)
    edges: Optional[Tuple[float, ...]] = None
    values: Optional[Tuple[float, ...]] = None
    weight_bound: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if (self.weights is None) == (self.law is None):
            raise ValueError("give exactly one of 'weights' or 'law'")
        if self.weights is not None:
            if not self.weights:
                raise ValueError("weights must be nonempty")
            bound = self.weight_bound if self.weight_bound is not None else max(self.weights)
            for i, a in enumerate(self.weights):
                if not math.isfinite(a) or a < 0 or a > bound:
                    raise ValueError(f"weights[{i}]={a} outside [0, {bound}]")
            if all(a == 0 for a in self.weights):
                raise ValueError("weights must not be all zero")
        if self.law == "table":
            if not self.edges or not self.values or len(self.edges) != len(self.values):
                raise ValueError("table law needs 'edges' and 'values' of equal nonzero length")
            if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
                raise ValueError("table edges must be strictly increasing")
            if any(v < 0 for v in self.values):
                raise ValueError("table values must be nonnegative")
            if all(v == 0 for v in self.values):
                raise ValueError("table values must not be all zero")
        return self

    @property
    def is_explicit(self) -> bool:
        return self.weights is not None


# ===== Representation rules =====

RuleKind = Literal["winner_take_all", "proportional", "step"]


class RepresentationRule(_Frozen):
    """Odd map from a group's vote margin to the split of its weight.

    Step rules are right-continuous tables on [0, 1] mirrored to [-1, 0);
    the value at a breakpoint belongs to the interval on its right and
    r(x) = 0 below the first breakpoint.
    """

    kind: RuleKind
    breakpoints: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()

    @property
    def jump_points(self) -> Tuple[float, ...]:
        """Discontinuities of r on [-1, 1]."""
        if self.kind == "winner_take_all":
            return (0.0,)
        if self.kind == "step":
            inner = tuple(b for b in self.breakpoints if 0 < b < 1)
            return tuple(sorted({-b for b in inner} | {0.0} | set(inner)))
        return ()


# ===== Margin distributions =====

MarginKind = Literal["rademacher", "uniform", "symmetric_beta", "discrete_symmetric"]


class MarginDistribution(_Frozen):
    """Symmetric nondegenerate law of a group vote margin X on [-1, 1].

    For `discrete_symmetric`, `points` lie in [0, 1]; a point x > 0 with
    probability p puts mass p/2 on each of -x and +x.
    """

    kind: MarginKind
    alpha: Optional[float] = Field(default=None, gt=0)
    points: Tuple[float, ...] = ()
    probabilities: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "symmetric_beta" and self.alpha is None:
            raise ValueError("symmetric_beta needs 'alpha' > 0")
        if self.kind == "discrete_symmetric":
            if not self.points or len(self.points) != len(self.probabilities):
                raise ValueError("discrete_symmetric needs 'points' and 'probabilities' of equal nonzero length")
            if len(set(self.points)) != len(self.points):
                raise ValueError("points must be distinct")
            if any(not 0 <= x <= 1 for x in self.points):
                raise ValueError("points must lie in [0, 1]")
            if any(p < 0 for p in self.probabilities):
                raise ValueError("probabilities must be nonnegative")
            if abs(math.fsum(self.probabilities) - 1.0) > PROB_TOL:
                raise ValueError("probabilities must sum to 1")
            if not any(x > 0 and p > 0 for x, p in zip(self.points, self.probabilities)):
                raise ValueError("distribution is degenerate: no mass off 0")
        return self

    @property
    def is_discrete(self) -> bool:
        return self.kind in ("rademacher", "discrete_symmetric")


# ===== Idiosyncratic noise (preference intensities) =====

NoiseKind = Literal["uniform", "symmetric_beta", "tabulated"]


class NoiseDistribution(_Frozen):
    """Symmetric distribution G_eps on [-bound, bound] with an evaluable CDF.

    A tabulated CDF gives G at `points` in (0, bound]; G(0) = 1/2 is implied,
    the last point must be `bound` with G = 1, and G is interpolated linearly
    and mirrored by G(-x) = 1 - G(x).
    """

    kind: NoiseKind
    bound: float = Field(default=1.0, gt=0)
    alpha: Optional[float] = Field(default=None, gt=0)
    points: Tuple[float, ...] = ()
    cdf: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "symmetric_beta" and self.alpha is None:
            raise ValueError("symmetric_beta needs 'alpha' > 0")
        if self.kind == "tabulated":
            if not self.points or len(self.points) != len(self.cdf):
                raise ValueError("tabulated noise needs 'points' and 'cdf' of equal nonzero length")
            if any(x <= 0 or x > self.bound for x in self.points):
                raise ValueError("points must lie in (0, bound]")
            if any(b <= a for a, b in zip(self.points, self.points[1:])):
                raise ValueError("points must be strictly increasing")
            if abs(self.points[-1] - self.bound) > PROB_TOL:
                raise ValueError("last point must equal bound")
            previous = 0.5
            for x, g in zip(self.points, self.cdf):
                if g < previous:
                    raise ValueError(f"cdf must be nondecreasing from 0.5; fails at {x}")
                previous = g
            if abs(self.cdf[-1] - 1.0) > PROB_TOL:
                raise ValueError("cdf must reach 1 at bound")
        return self


# ===== Extended preference models =====

class IntensityModel(_Frozen):
    """Group margins Theta_i with idiosyncratic noise eps: a group's vote margin is 2 G_eps(Theta_i) - 1."""

    theta: MarginDistribution
    noise: NoiseDistribution


class IndepModel(_Frozen):
    """Independent individual preferences: X_i = N_i / sqrt(s_i).

    `population_scale` switches to finite groups of max(1, round(k s_i))
    fair +-1 ballots each.
    """

    sizes: Tuple[float, ...] = Field(min_length=1)
    rule: RepresentationRule
    population_scale: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if self.rule.kind not in ("winner_take_all", "proportional"):
            raise ValueError("independent model supports winner_take_all and proportional rules only")
        for i, s in enumerate(self.sizes):
            if not math.isfinite(s) or s <= 0:
                raise ValueError(f"sizes[{i}] must be positive, got {s}")
        return self
