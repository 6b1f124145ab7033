"""
Monte Carlo simulation of the two-stage vote.

Per sample: draw the group margins X_i, form the vote margin S = sum s_i X_i
and the weight margin T = sum a_i r(X_i), decide D = sign T (a fair coin on
ties) and record the normalized welfare W = D S / sigma.

Randomness is keyed by fixed blocks of RNG_BLOCK samples: block b draws from
Philox(SeedSequence([seed, b])), first the block's margin matrix and then its
coins. Chunks only group whole blocks for scheduling, so the samples depend on
(seed, samples) alone, never on chunk_size or thread count.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field

from app.core.config import get_settings
from app.core.exceptions import DomainError
from app.core.logging import logger
from app.models.models import MarginDistribution, RepresentationRule, SizeDistribution, Society, WeightAllocation
from app.services import analytics
from app.services.model import (
    draw_margins,
    draw_society,
    make_stream,
    materialize_weights,
    repeat_pattern,
    rule_values,
    second_moment,
)
from app.services.stats import EmpiricalWelfare, SkewNormal, cdf_table, ks_distance

RNG_BLOCK = 4096
TIE_REL_TOL = 1e-12
SKETCH_BINS = 10_000
SKETCH_RANGE = 6.0
SKETCH_RESOLUTION = 1e-3


class SimulationSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    society: Society
    alloc: WeightAllocation
    rule: RepresentationRule
    margin: MarginDistribution
    samples: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    chunk_size: int = Field(default_factory=lambda: get_settings().chunk_size, ge=1)
    antithetic: bool = False
    keep_weight_margin: bool = False
    sample_cap: Optional[int] = Field(default=None, ge=1)


# ===========================================================
#              KERNEL
# ===========================================================

@dataclass(frozen=True)
class WelfareKernel:
    """Everything a block needs: how to draw X and how X feeds S and T."""

    model: str
    sizes: np.ndarray
    weights: np.ndarray
    sigma: float
    tau: float
    draw: Callable[[np.random.Generator, int], np.ndarray]
    weight_margin: Callable[[np.ndarray], np.ndarray]
    vote_margin: Optional[Callable[[np.ndarray], np.ndarray]] = None
    discrete: bool = False

    @property
    def tie_tol(self) -> float:
        return TIE_REL_TOL * float(np.sum(self.weights))


@dataclass(frozen=True)
class _Block:
    index: int
    w: Optional[np.ndarray]
    s_norm: Optional[np.ndarray]
    t_norm: Optional[np.ndarray]
    w_counts: Optional[np.ndarray]
    s_counts: Optional[np.ndarray]
    sums: np.ndarray  # sum w, sum w^2, sum |s|, sum d^2, sum s^2, negatives, ties


SKETCH_EDGES = np.linspace(-SKETCH_RANGE, SKETCH_RANGE, SKETCH_BINS + 1)


def zero_rounded(s: np.ndarray, magnitude: np.ndarray) -> np.ndarray:
    """Set S to exactly 0 where it is rounding noise against the summed magnitude of its terms."""
    return np.where(np.abs(s) <= TIE_REL_TOL * magnitude, 0.0, s)


def _run_block(kernel: WelfareKernel, seed: int, index: int, length: int, antithetic: bool, keep: bool, keep_t: bool) -> _Block:
    rng = make_stream(seed, index)
    x = kernel.draw(rng, length)
    coins = rng.integers(0, 2, size=length) * 2.0 - 1.0
    if antithetic:
        x, coins = -x, -coins

    y = x if kernel.vote_margin is None else kernel.vote_margin(x)
    s = zero_rounded((y * kernel.sizes).sum(axis=1), (np.abs(y) * kernel.sizes).sum(axis=1))
    t = (kernel.weight_margin(x) * kernel.weights).sum(axis=1)
    ties = np.abs(t) <= kernel.tie_tol
    decision = np.where(ties, coins, np.sign(t))
    w = np.where(s == 0.0, 0.0, decision * s) / kernel.sigma
    s_norm = s / kernel.sigma
    deficit = (np.abs(s_norm) - w) / 2.0

    sums = np.array([
        w.sum(),
        (w * w).sum(),
        np.abs(s_norm).sum(),
        (deficit * deficit).sum(),
        (s_norm * s_norm).sum(),
        float(np.count_nonzero(w < 0)),
        float(np.count_nonzero(ties)),
    ])
    if keep:
        return _Block(index, w, s_norm, t / kernel.tau if keep_t else None, None, None, sums)
    clip = lambda v: np.clip(v, -SKETCH_RANGE, SKETCH_RANGE)
    return _Block(
        index,
        None,
        None,
        None,
        np.histogram(clip(w), bins=SKETCH_EDGES)[0],
        np.histogram(clip(s_norm), bins=SKETCH_EDGES)[0],
        sums,
    )


def _run_chunk(kernel: WelfareKernel, seed: int, blocks: Sequence[int], samples: int, antithetic: bool, keep: bool, keep_t: bool) -> List[_Block]:
    out = []
    for b in blocks:
        length = min(RNG_BLOCK, samples - b * RNG_BLOCK)
        out.append(_run_block(kernel, seed, b, length, antithetic, keep, keep_t))
    return out


# ===========================================================
#              RESULTS
# ===========================================================

@dataclass(frozen=True)
class Estimates:
    u_hat: float
    delta_hat: float
    p_hat: float
    se_u: float
    se_delta: float
    se_p: float

    @property
    def std_errors(self) -> Dict[str, float]:
        return {"u_hat": self.se_u, "delta_hat": self.se_delta, "p_hat": self.se_p}


@dataclass(frozen=True, eq=False)
class SimulationResult:
    model: str
    samples: int
    seed: int
    sigma: float
    tau: float
    welfare: EmpiricalWelfare
    s_norm: EmpiricalWelfare
    sums: np.ndarray
    w_samples: Optional[np.ndarray] = None  # sample order, None in sketch mode
    s_samples: Optional[np.ndarray] = None
    t_samples: Optional[np.ndarray] = None
    meta: Dict[str, object] = field(default_factory=dict)

    @property
    def tie_count(self) -> int:
        return int(self.sums[6])

    @property
    def estimates(self) -> "Estimates":
        return estimate_objectives(self)

    @classmethod
    def from_samples(cls, w: Sequence[float], s_norm: Sequence[float], model: str = "correlated", ties: int = 0) -> "SimulationResult":
        w = np.asarray(w, dtype=float)
        s_norm = np.asarray(s_norm, dtype=float)
        deficit = (np.abs(s_norm) - w) / 2.0
        sums = np.array([
            w.sum(), (w * w).sum(), np.abs(s_norm).sum(), (deficit * deficit).sum(),
            (s_norm * s_norm).sum(), float(np.count_nonzero(w < 0)), float(ties),
        ])
        return cls(
            model=model,
            samples=int(w.size),
            seed=0,
            sigma=1.0,
            tau=1.0,
            welfare=EmpiricalWelfare.from_samples(w),
            s_norm=EmpiricalWelfare.from_samples(s_norm),
            sums=sums,
            w_samples=w,
            s_samples=s_norm,
        )

    def samples_frame(self) -> pd.DataFrame:
        if self.w_samples is None:
            raise DomainError("samples were not retained (run exceeded the sample cap)")
        return pd.DataFrame({"index": np.arange(self.samples), "w": self.w_samples, "s_norm": self.s_samples})


def _sample_std(total: float, total_sq: float, m: int) -> float:
    if m < 2:
        return math.inf
    return math.sqrt(max(0.0, (total_sq - total * total / m) / (m - 1)))


def estimate_objectives(result: SimulationResult) -> Estimates:
    """Sample means with standard errors; delta_hat = (mean |S|/sigma - u_hat) / 2 on the same sample."""
    m = result.samples
    sum_w, sum_w2, sum_abs_s, sum_d2, _, negatives, _ = result.sums
    u_hat = sum_w / m
    delta_hat = (sum_abs_s / m - u_hat) / 2.0
    p_hat = negatives / m
    return Estimates(
        u_hat=float(u_hat),
        delta_hat=float(delta_hat),
        p_hat=float(p_hat),
        se_u=_sample_std(sum_w, sum_w2, m) / math.sqrt(m),
        se_delta=_sample_std(delta_hat * m, sum_d2, m) / math.sqrt(m),
        se_p=math.sqrt(p_hat * (1.0 - p_hat) / m),
    )


def run_kernel(
    kernel: WelfareKernel,
    samples: int,
    seed: int,
    chunk_size: int,
    threads: Optional[int] = None,
    antithetic: bool = False,
    keep_weight_margin: bool = False,
    sample_cap: Optional[int] = None,
) -> SimulationResult:
    settings = get_settings()
    threads = threads or settings.threads
    cap = sample_cap or settings.sample_cap
    keep = samples <= cap
    if keep_weight_margin and not keep:
        raise DomainError("weight margins can only be kept when samples fit under the sample cap")

    n_blocks = -(-samples // RNG_BLOCK)
    per_chunk = max(1, -(-chunk_size // RNG_BLOCK))
    chunks = [range(start, min(start + per_chunk, n_blocks)) for start in range(0, n_blocks, per_chunk)]
    context = {"event": "simulate", "model": kernel.model, "samples": samples, "groups": int(kernel.sizes.size), "threads": threads}
    logger.info("Simulation started", extra={**context, "status": "started", "chunks": len(chunks), "retained": keep})

    parts = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_run_chunk)(kernel, seed, chunk, samples, antithetic, keep, keep_weight_margin) for chunk in chunks
    )
    blocks = [block for part in parts for block in part]
    sums = np.array([math.fsum(column) for column in np.stack([b.sums for b in blocks]).T])

    meta = {"model": kernel.model, "seed": seed, "samples": samples}
    if keep:
        w = np.concatenate([b.w for b in blocks])
        s_norm = np.concatenate([b.s_norm for b in blocks])
        t_norm = np.concatenate([b.t_norm for b in blocks]) if keep_weight_margin else None
        welfare = EmpiricalWelfare.from_samples(w, meta)
        s_dist = EmpiricalWelfare.from_samples(s_norm, meta)
    else:
        w = s_norm = t_norm = None
        welfare = EmpiricalWelfare.from_histogram(SKETCH_EDGES, sum(b.w_counts for b in blocks), meta, SKETCH_RESOLUTION)
        s_dist = EmpiricalWelfare.from_histogram(SKETCH_EDGES, sum(b.s_counts for b in blocks), meta, SKETCH_RESOLUTION)

    result = SimulationResult(
        model=kernel.model,
        samples=samples,
        seed=seed,
        sigma=kernel.sigma,
        tau=kernel.tau,
        welfare=welfare,
        s_norm=s_dist,
        sums=sums,
        w_samples=w,
        s_samples=s_norm,
        t_samples=t_norm,
        meta=meta,
    )
    if result.tie_count and not kernel.discrete:
        logger.warning("Ties in the weight margin under continuous margins", extra={**context, "tie_count": result.tie_count})
    logger.info("Simulation completed", extra={**context, "status": "success", "tie_count": result.tie_count})
    return result


# ===========================================================
#              CORRELATED MODEL
# ===========================================================

def correlated_kernel(society: Society, alloc: WeightAllocation, rule: RepresentationRule, margin: MarginDistribution, with_tau: bool = False) -> WelfareKernel:
    sizes = np.asarray(society.sizes, dtype=float)
    weights = np.asarray(materialize_weights(society, alloc), dtype=float)
    sigma = math.sqrt(second_moment(margin) * math.fsum(sizes * sizes))
    tau = math.sqrt(analytics.rule_second_moment(margin, rule) * math.fsum(weights * weights)) if with_tau else 1.0
    n = sizes.size
    return WelfareKernel(
        model="correlated",
        sizes=sizes,
        weights=weights,
        sigma=sigma,
        tau=tau,
        draw=lambda rng, length: draw_margins(margin, rng, (length, n)),
        weight_margin=lambda x: rule_values(rule, x),
        discrete=margin.is_discrete,
    )


def simulate(spec: SimulationSpec, threads: Optional[int] = None) -> SimulationResult:
    kernel = correlated_kernel(spec.society, spec.alloc, spec.rule, spec.margin, with_tau=spec.keep_weight_margin)
    return run_kernel(
        kernel,
        spec.samples,
        spec.seed,
        spec.chunk_size,
        threads=threads,
        antithetic=spec.antithetic,
        keep_weight_margin=spec.keep_weight_margin,
        sample_cap=spec.sample_cap,
    )


# ===========================================================
#              CONVERGENCE
# ===========================================================

def convergence_sweep(
    base_spec: SimulationSpec,
    n_values: Sequence[int],
    replication: Union[SizeDistribution, Sequence[float]],
    threads: Optional[int] = None,
) -> pd.DataFrame:
    """One row per n: estimates, their limits, the gaps and the KS distance to SN(lambda_a).

    Sizes are drawn i.i.d. from a limiting size distribution (stream derived
    from the spec seed and n) or repeat a fixed size pattern. lambda_a for the
    KS column uses the cosine of the realized society; the limits use c*.
    """
    if not n_values:
        raise DomainError("n_values must be nonempty")
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise DomainError("n_values must be strictly ascending")
    if base_spec.alloc.is_explicit:
        raise DomainError("a convergence sweep needs a weight law, not explicit weights")

    rho_value = analytics.rho(base_spec.margin, base_spec.rule)
    if isinstance(replication, SizeDistribution):
        c_star = analytics.cosine_limit(replication, base_spec.alloc)
    else:
        pattern = repeat_pattern(replication, len(replication))
        c_star = analytics.cosine(pattern.sizes, materialize_weights(pattern, base_spec.alloc))
    limits = analytics.asymptotic_objectives(rho_value, c_star)

    rows = []
    for n in n_values:
        if isinstance(replication, SizeDistribution):
            society = draw_society(replication, n, base_spec.seed)
        else:
            society = repeat_pattern(replication, n)
        spec = base_spec.model_copy(update={"society": society})
        logger.info("Convergence row started", extra={"event": "convergence_sweep", "n": n, "status": "started"})
        result = simulate(spec, threads=threads)
        est = result.estimates

        c_n = analytics.cosine(society.sizes, materialize_weights(society, spec.alloc))
        lam_n = analytics.lambda_param(rho_value, c_n)
        ks = ks_distance(result.welfare, cdf_table(SkewNormal(lam_n)))
        rows.append({
            "n": n,
            "cosine": c_n,
            "lambda": lam_n,
            "u_hat": est.u_hat,
            "delta_hat": est.delta_hat,
            "p_hat": est.p_hat,
            "u_limit": limits.u_limit,
            "delta_limit": limits.delta_limit,
            "p_limit": limits.p_limit,
            "u_gap": abs(est.u_hat - limits.u_limit),
            "delta_gap": abs(est.delta_hat - limits.delta_limit),
            "p_gap": abs(est.p_hat - limits.p_limit),
            "ks": ks,
            "ks_tolerance": result.welfare.resolution,
        })
    return pd.DataFrame(rows)
