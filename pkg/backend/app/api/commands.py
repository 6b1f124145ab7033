"""
Command implementations: indices, simulate, exact, compare, converge.

Each command takes a validated RunConfig and an output directory, writes its
artifacts there and returns the report dict that main prints.
"""
from pathlib import Path
from typing import Dict, Optional

from app.core.exceptions import ConfigError
from app.core.logging import logger
from app.core.serialization import write_csv, write_json
from app.models.config import RunConfig, SocietyConfig
from app.models.models import SizeDistribution, Society, WeightAllocation
from app.services import analytics, extensions
from app.services.engine import SimulationResult, SimulationSpec, convergence_sweep, simulate
from app.services.model import draw_society, materialize_weights, repeat_pattern
from app.services.oracle import exact_welfare
from app.services.stats import Dominance, dominance_test

COSINE_TIE_TOL = 1e-12


def build_society(cfg: SocietyConfig, seed: int, n: Optional[int] = None) -> Society:
    n = n or cfg.n
    if cfg.sizes is not None:
        return Society(sizes=cfg.sizes, size_bound=cfg.size_bound)
    if cfg.pattern is not None:
        return repeat_pattern(cfg.pattern, n, size_bound=cfg.size_bound)
    return draw_society(cfg.limit_dist, n, seed, size_bound=cfg.size_bound)


def _run_model(cfg: RunConfig, society: Society, alloc: WeightAllocation, threads: Optional[int]) -> SimulationResult:
    options = {"chunk_size": cfg.chunk_size} if cfg.chunk_size else {}
    if cfg.model == "correlated":
        spec = SimulationSpec(
            society=society,
            alloc=alloc,
            rule=cfg.rule,
            margin=cfg.margin,
            samples=cfg.samples,
            seed=cfg.seed,
            antithetic=cfg.antithetic,
            **options,
        )
        return simulate(spec, threads=threads)
    if cfg.model == "intensity":
        return extensions.simulate_intensity(
            cfg.intensity_model(), society, alloc, cfg.rule, cfg.samples, cfg.seed,
            threads=threads, antithetic=cfg.antithetic, **options,
        )
    return extensions.simulate_indep(
        cfg.indep_model(society), materialize_weights(society, alloc), cfg.samples, cfg.seed,
        threads=threads, antithetic=cfg.antithetic, **options,
    )


def _model_rho(cfg: RunConfig) -> float:
    if cfg.model == "intensity":
        return extensions.rho_intensity(cfg.intensity_model(), cfg.rule)
    return analytics.rho(cfg.margin, cfg.rule)


def _limit_dist(cfg: RunConfig, alloc: WeightAllocation) -> Optional[SizeDistribution]:
    return None if alloc.is_explicit else cfg.society.limit_dist


def limit_fields(cfg: RunConfig, society: Society, alloc: WeightAllocation, weights) -> Dict:
    """lambda_a and the asymptotic objectives of the configured model.

    Indices are taken at the size distribution when the config gives one,
    otherwise at the materialized society.
    """
    limit_dist = _limit_dist(cfg, alloc)
    if cfg.model == "independent":
        model = cfg.indep_model(society)
        correlation = extensions.indep_correlation(model, weights)
        fields = {"correlation": correlation, "lambda": extensions.indep_lambda(model, weights)}
        if cfg.rule.kind == "winner_take_all":
            c_sqrt = analytics.sqrt_cosine_limit(limit_dist, alloc) if limit_dist is not None else analytics.sqrt_cosine(society.sizes, weights)
            fields["p_limit"] = extensions.indep_asymptotic_p(c_sqrt)
        else:
            # exact at every n under the proportional rule
            fields["p_limit"] = analytics.asymptotic_objectives(1.0, correlation).p_limit
        return fields
    c_star = analytics.cosine_limit(limit_dist, alloc) if limit_dist is not None else analytics.cosine(society.sizes, weights)
    return analytics.asymptotic_objectives(_model_rho(cfg), c_star).as_dict()


# ===========================================================
#              INDICES
# ===========================================================

def cmd_indices(cfg: RunConfig, out: Optional[Path] = None, threads: Optional[int] = None) -> Dict:
    society = build_society(cfg.society, cfg.seed)
    alloc = cfg.require_allocation()
    weights = materialize_weights(society, alloc)
    report: Dict = {
        "model": cfg.model,
        "n": society.n,
        "cosine": analytics.cosine(society.sizes, weights),
        "sqrt_cosine": analytics.sqrt_cosine(society.sizes, weights),
        "hat_c_sqrt": analytics.hat_c_sqrt(society.sizes, weights),
        "sainte_lague": analytics.sainte_lague(society.sizes, weights),
    }
    limit_dist = _limit_dist(cfg, alloc)
    if limit_dist is not None:
        report["cosine_limit"] = analytics.cosine_limit(limit_dist, alloc)
        report["sqrt_cosine_limit"] = analytics.sqrt_cosine_limit(limit_dist, alloc)
    report.update(limit_fields(cfg, society, alloc, weights))

    if out is not None:
        report["files"] = [str(write_json(out / "indices.json", report))]
    return report


# ===========================================================
#              SIMULATE
# ===========================================================

def summarize(result: SimulationResult) -> Dict:
    est = result.estimates
    return {
        "model": result.model,
        "samples": result.samples,
        "seed": result.seed,
        "sigma": result.sigma,
        "u_hat": est.u_hat,
        "delta_hat": est.delta_hat,
        "p_hat": est.p_hat,
        "std_errors": est.std_errors,
        "tie_count": result.tie_count,
        "sketch": result.w_samples is None,
    }


def cmd_simulate(cfg: RunConfig, out: Path, threads: Optional[int] = None) -> Dict:
    society = build_society(cfg.society, cfg.seed)
    alloc = cfg.require_allocation()
    result = _run_model(cfg, society, alloc, threads)
    summary = {**summarize(result), **limit_fields(cfg, society, alloc, materialize_weights(society, alloc))}
    files = [write_json(out / "summary.json", summary)]
    if cfg.write_samples and result.w_samples is not None:
        files.append(write_csv(out / "samples.csv", result.samples_frame()))
    elif cfg.write_samples:
        logger.warning("Samples exceed the sample cap; samples.csv not written", extra={"event": "command", "samples": result.samples})
    return {**summary, "files": [str(f) for f in files]}


# ===========================================================
#              EXACT
# ===========================================================

def _fraction(value) -> str:
    return f"{value.numerator}/{value.denominator}"


def cmd_exact(cfg: RunConfig, out: Path, threads: Optional[int] = None) -> Dict:
    if cfg.model != "correlated":
        raise ConfigError("invalid configuration:\n  model: exact mode supports the correlated model only")
    society = build_society(cfg.society, cfg.seed)
    dist = exact_welfare(society, cfg.require_allocation(), cfg.rule, cfg.margin, budget=cfg.budget, threads=threads)
    report: Dict = {
        "u": dist.u,
        "delta": dist.delta,
        "p": dist.p,
        "profiles": dist.profiles,
        "atoms": len(dist.values),
        "mode": "rational" if dist.rational else "float",
    }
    if dist.rational is not None:
        report["rational"] = {
            "sigma_squared": _fraction(dist.rational.sigma_squared),
            "u_numerator": _fraction(dist.rational.u_numerator),
            "delta_numerator": _fraction(dist.rational.delta_numerator),
            "p": _fraction(dist.rational.p),
        }
    files = [write_csv(out / "atoms.csv", dist.atoms_frame()), write_json(out / "exact.json", report)]
    return {**report, "files": [str(f) for f in files]}


# ===========================================================
#              COMPARE
# ===========================================================

def _ordering_index(cfg: RunConfig, society: Society, weights) -> float:
    if cfg.model == "independent":
        return extensions.indep_correlation(cfg.indep_model(society), weights)
    return analytics.cosine(society.sizes, weights)


def _expected_verdict(index_a: float, index_b: float) -> Optional[Dominance]:
    if abs(index_a - index_b) <= COSINE_TIE_TOL:
        return None
    return Dominance.DOMINATES if index_a > index_b else Dominance.DOMINATED


def cmd_compare(cfg: RunConfig, out: Path, threads: Optional[int] = None) -> Dict:
    if cfg.allocations is None:
        raise ConfigError("invalid configuration:\n  allocations: compare needs two allocations")
    society = build_society(cfg.society, cfg.seed)
    alloc_a, alloc_b = cfg.allocations
    weights_a = materialize_weights(society, alloc_a)
    weights_b = materialize_weights(society, alloc_b)
    index_a = _ordering_index(cfg, society, weights_a)
    index_b = _ordering_index(cfg, society, weights_b)

    # same seed for both allocations: the comparison uses common random numbers
    result_a = _run_model(cfg, society, alloc_a, threads)
    result_b = _run_model(cfg, society, alloc_b, threads)
    test = dominance_test(result_a.welfare, result_b.welfare, cfg.alpha)

    expected = _expected_verdict(index_a, index_b)
    if expected is None:
        agreement = test.statistically_equal
    else:
        agreement = test.verdict == expected and not test.statistically_equal

    report = {
        "model": cfg.model,
        "n": society.n,
        "index": "correlation" if cfg.model == "independent" else "cosine",
        "cosine_a": analytics.cosine(society.sizes, weights_a),
        "cosine_b": analytics.cosine(society.sizes, weights_b),
        "index_a": index_a,
        "index_b": index_b,
        "verdict": test.label,
        "statistically_equal": test.statistically_equal,
        "max_excess": test.max_excess,
        "max_deficit": test.max_deficit,
        "slack": test.slack,
        "alpha": cfg.alpha,
        "agreement": agreement,
        "summary_a": summarize(result_a),
        "summary_b": summarize(result_b),
    }
    return {**report, "files": [str(write_json(out / "compare.json", report))]}


# ===========================================================
#              CONVERGE
# ===========================================================

def cmd_converge(cfg: RunConfig, out: Path, threads: Optional[int] = None) -> Dict:
    if cfg.model != "correlated":
        raise ConfigError("invalid configuration:\n  model: converge supports the correlated model only")
    if cfg.n_values is None:
        raise ConfigError("invalid configuration:\n  n_values: converge needs an ascending list of n")
    if cfg.society.sizes is not None:
        raise ConfigError("invalid configuration:\n  society: converge needs a 'pattern' or a 'support' to grow the society")
    replication = cfg.society.limit_dist or cfg.society.pattern

    base_society = build_society(cfg.society, cfg.seed, n=cfg.n_values[0])
    options = {"chunk_size": cfg.chunk_size} if cfg.chunk_size else {}
    base = SimulationSpec(
        society=base_society,
        alloc=cfg.require_allocation(),
        rule=cfg.rule,
        margin=cfg.margin,
        samples=cfg.samples,
        seed=cfg.seed,
        antithetic=cfg.antithetic,
        **options,
    )
    table = convergence_sweep(base, cfg.n_values, replication, threads=threads)
    path = write_csv(out / "converge.csv", table)
    last = table.iloc[-1]
    return {
        "rows": int(len(table)),
        "last_n": int(last["n"]),
        "u_gap": float(last["u_gap"]),
        "delta_gap": float(last["delta_gap"]),
        "p_gap": float(last["p_gap"]),
        "ks": float(last["ks"]),
        "files": [str(path)],
    }


COMMANDS = {
    "indices": cmd_indices,
    "simulate": cmd_simulate,
    "exact": cmd_exact,
    "compare": cmd_compare,
    "converge": cmd_converge,
}
