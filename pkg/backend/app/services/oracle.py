"""
Exact welfare distribution for small societies with discrete margins.

All k^n margin profiles are enumerated (lexicographic over the ascending
support). A profile with T != 0 puts its whole probability on (sign T) S /
sigma; a tie splits it between +S/sigma and -S/sigma. Integer sizes and
weights with decimal margin values and probabilities run in rational mode:
every probability and every welfare numerator is a Fraction and sigma is
kept as sqrt(sigma_squared).
"""
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.core.config import get_settings
from app.core.exceptions import BudgetExceededError, DomainError
from app.core.logging import logger
from app.models.models import MarginDistribution, RepresentationRule, Society, WeightAllocation
from app.services.engine import TIE_REL_TOL, SimulationSpec, simulate, zero_rounded
from app.services.model import (
    exact_margin_atoms,
    exact_rule_value,
    integer_valued,
    margin_atoms,
    materialize_weights,
    rule_values,
    second_moment,
)

FLOAT_MERGE_TOL = 1e-12
PROFILE_BLOCK = 1 << 16

OracleMode = Literal["auto", "rational", "float"]


@dataclass(frozen=True)
class RationalSummary:
    """Exact values: welfare atoms are numerator / sqrt(sigma_squared)."""

    sigma_squared: Fraction
    atoms: Tuple[Tuple[Fraction, Fraction], ...]  # (numerator of W, probability)
    u_numerator: Fraction
    delta_numerator: Fraction
    p: Fraction


@dataclass(frozen=True)
class ExactDistribution:
    values: Tuple[float, ...]
    probabilities: Tuple[float, ...]
    u: float
    delta: float
    p: float
    profiles: int
    rational: Optional[RationalSummary] = None

    def atoms_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"value": self.values, "probability": self.probabilities})


def _check_budget(k: int, n: int, budget: Optional[int]) -> int:
    budget = budget or get_settings().budget
    profiles = k**n
    if profiles * n > budget:
        raise BudgetExceededError(f"enumerating {k}^{n} = {profiles} profiles exceeds the budget of {budget} operations")
    return profiles


# ===========================================================
#              RATIONAL MODE
# ===========================================================

def _exact_rational(sizes: List[float], weights: List[float], rule: RepresentationRule, atoms: List[Tuple[Fraction, Fraction]], margin: MarginDistribution) -> ExactDistribution:
    s = [Fraction(int(v)) for v in sizes]
    a = [Fraction(int(v)) for v in weights]
    second = sum(p * x * x for x, p in atoms)
    sigma_squared = second * sum(v * v for v in s)
    sigma = math.sqrt(sigma_squared)
    r_atoms = [exact_rule_value(rule, x) for x, _ in atoms]

    mass: Dict[Fraction, Fraction] = {}
    abs_s_total = Fraction(0)
    profiles = 0
    for profile in itertools.product(range(len(atoms)), repeat=len(s)):
        profiles += 1
        prob = Fraction(1)
        total_s = Fraction(0)
        total_t = Fraction(0)
        for i, j in enumerate(profile):
            x, p = atoms[j]
            prob *= p
            total_s += s[i] * x
            total_t += a[i] * r_atoms[j]
        abs_s_total += prob * abs(total_s)
        if total_t == 0:
            half = prob / 2
            mass[total_s] = mass.get(total_s, Fraction(0)) + half
            mass[-total_s] = mass.get(-total_s, Fraction(0)) + half
        else:
            value = total_s if total_t > 0 else -total_s
            mass[value] = mass.get(value, Fraction(0)) + prob

    ordered = tuple((v, mass[v]) for v in sorted(mass) if mass[v] > 0)
    u_num = sum(v * p for v, p in ordered)
    delta_num = (abs_s_total - u_num) / 2
    p_exact = sum(p for v, p in ordered if v < 0)
    return ExactDistribution(
        values=tuple(float(v) / sigma for v, _ in ordered),
        probabilities=tuple(float(p) for _, p in ordered),
        u=float(u_num) / sigma,
        delta=float(delta_num) / sigma,
        p=float(p_exact),
        profiles=profiles,
        rational=RationalSummary(sigma_squared, ordered, u_num, delta_num, p_exact),
    )


# ===========================================================
#              FLOAT MODE
# ===========================================================

def _float_block(start: int, stop: int, k: int, n: int, sizes: np.ndarray, weights: np.ndarray, values: np.ndarray, probs: np.ndarray, r_values: np.ndarray, tie_tol: float, sigma: float):
    index = np.arange(start, stop)
    # lexicographic digits, most significant group first
    digits = (index[:, None] // (k ** np.arange(n - 1, -1, -1))[None, :]) % k
    prob = np.prod(probs[digits], axis=1)
    s = zero_rounded((values[digits] * sizes).sum(axis=1), (np.abs(values[digits]) * sizes).sum(axis=1))
    t = (r_values[digits] * weights).sum(axis=1)
    ties = np.abs(t) <= tie_tol
    decided = np.where(t > 0, s, -s)
    w = np.concatenate([decided[~ties], s[ties], -s[ties]]) / sigma
    # fold -0.0 into the atom at 0
    w[w == 0.0] = 0.0
    p = np.concatenate([prob[~ties], prob[ties] / 2, prob[ties] / 2])
    return w, p, math.fsum(prob * np.abs(s) / sigma)


def _merge(values: np.ndarray, probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    order = np.argsort(values, kind="stable")
    values, probs = values[order], probs[order]
    merged_v: List[float] = []
    merged_p: List[float] = []
    for v, p in zip(values, probs):
        if merged_v and abs(v - merged_v[-1]) <= FLOAT_MERGE_TOL * max(1.0, abs(v)):
            merged_p[-1] += p
        else:
            merged_v.append(float(v))
            merged_p.append(float(p))
    return np.asarray(merged_v), np.asarray(merged_p)


def _exact_float(sizes: List[float], weights: List[float], rule: RepresentationRule, margin: MarginDistribution, profiles: int, threads: int) -> ExactDistribution:
    values, probs = margin_atoms(margin)
    s = np.asarray(sizes, dtype=float)
    a = np.asarray(weights, dtype=float)
    k, n = values.size, s.size
    sigma = math.sqrt(second_moment(margin) * math.fsum(s * s))
    tie_tol = TIE_REL_TOL * float(a.sum())
    r_values = rule_values(rule, values)

    bounds = [(lo, min(lo + PROFILE_BLOCK, profiles)) for lo in range(0, profiles, PROFILE_BLOCK)]
    parts = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_float_block)(lo, hi, k, n, s, a, values, probs, r_values, tie_tol, sigma) for lo, hi in bounds
    )
    w, p = _merge(np.concatenate([part[0] for part in parts]), np.concatenate([part[1] for part in parts]))
    keep = p > 0
    w, p = w[keep], p[keep]
    u = math.fsum(w * p)
    abs_mean = math.fsum(part[2] for part in parts)
    return ExactDistribution(
        values=tuple(w.tolist()),
        probabilities=tuple(p.tolist()),
        u=u,
        delta=(abs_mean - u) / 2.0,
        p=math.fsum(p[w < 0]),
        profiles=profiles,
    )


# ===========================================================
#              OPERATIONS
# ===========================================================

def exact_welfare(
    society: Society,
    alloc: WeightAllocation,
    rule: RepresentationRule,
    margin: MarginDistribution,
    budget: Optional[int] = None,
    mode: OracleMode = "auto",
    threads: Optional[int] = None,
) -> ExactDistribution:
    if not margin.is_discrete:
        raise DomainError("exact mode requires discrete margins")
    sizes = list(society.sizes)
    weights = materialize_weights(society, alloc)
    k = len(margin_atoms(margin)[0])
    profiles = _check_budget(k, len(sizes), budget)

    atoms = exact_margin_atoms(margin)
    rational_ok = atoms is not None and integer_valued(sizes) and integer_valued(weights)
    if mode == "rational" and not rational_ok:
        raise DomainError("rational mode needs integer sizes and weights and decimal margin probabilities")
    use_rational = mode == "rational" or (mode == "auto" and rational_ok)

    context = {"event": "exact_welfare", "profiles": profiles, "groups": len(sizes), "mode": "rational" if use_rational else "float"}
    logger.info("Exact enumeration started", extra={**context, "status": "started"})
    if use_rational:
        result = _exact_rational(sizes, weights, rule, atoms, margin)
    else:
        result = _exact_float(sizes, weights, rule, margin, profiles, threads or get_settings().threads)
    logger.info("Exact enumeration completed", extra={**context, "status": "success", "atoms": len(result.values)})
    return result


@dataclass(frozen=True)
class OracleComparison:
    exact: ExactDistribution
    u_gap: float
    delta_gap: float
    p_gap: float
    se_u: float
    se_delta: float
    se_p: float
    sigmas: float = 4.0

    @property
    def within(self) -> Dict[str, bool]:
        return {
            "u": self.u_gap <= self.sigmas * self.se_u,
            "delta": self.delta_gap <= self.sigmas * self.se_delta,
            "p": self.p_gap <= self.sigmas * self.se_p,
        }

    def as_dict(self) -> dict:
        return {
            "u_gap": self.u_gap,
            "delta_gap": self.delta_gap,
            "p_gap": self.p_gap,
            "se_u": self.se_u,
            "se_delta": self.se_delta,
            "se_p": self.se_p,
            "within": self.within,
        }


def exact_vs_simulation(spec: SimulationSpec, budget: Optional[int] = None, threads: Optional[int] = None) -> OracleComparison:
    exact = exact_welfare(spec.society, spec.alloc, spec.rule, spec.margin, budget=budget, threads=threads)
    est = simulate(spec, threads=threads).estimates
    return OracleComparison(
        exact=exact,
        u_gap=abs(est.u_hat - exact.u),
        delta_gap=abs(est.delta_hat - exact.delta),
        p_gap=abs(est.p_hat - exact.p),
        se_u=est.se_u,
        se_delta=est.se_delta,
        se_p=est.se_p,
    )
