"""
Run configuration: one JSON document per command invocation.

The schema embeds the domain models directly, so allocations, rules and
distributions are validated by their own invariants. Societies are only
described here; app.api.commands builds them (a drawn society needs the seed).
"""
import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.exceptions import ConfigError, config_error_from_validation
from app.models.models import (
    IndepModel,
    IntensityModel,
    MarginDistribution,
    NoiseDistribution,
    RepresentationRule,
    SizeDistribution,
    Society,
    WeightAllocation,
)
from app.services.model import validate_rule

ModelKind = Literal["correlated", "intensity", "independent"]


class SocietyConfig(BaseModel):
    """Inline sizes, a repeated pattern, or n draws from a limiting size distribution."""

    model_config = ConfigDict(extra="forbid")

    sizes: Optional[Tuple[float, ...]] = None
    pattern: Optional[Tuple[float, ...]] = None
    support: Optional[Tuple[float, ...]] = None
    probabilities: Optional[Tuple[float, ...]] = None
    n: Optional[int] = Field(default=None, ge=1)
    size_bound: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_source(self):
        sources = [self.sizes is not None, self.pattern is not None, self.support is not None]
        if sum(sources) != 1:
            raise ValueError("give exactly one of 'sizes', 'pattern' or 'support'")
        if (self.pattern is not None or self.support is not None) and self.n is None:
            raise ValueError("'pattern' and 'support' need 'n'")
        if self.support is not None and self.probabilities is None:
            raise ValueError("'support' needs 'probabilities'")
        return self

    @property
    def limit_dist(self) -> Optional[SizeDistribution]:
        if self.support is None:
            return None
        return SizeDistribution(support=self.support, probabilities=self.probabilities)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelKind = "correlated"
    society: SocietyConfig
    allocation: Optional[WeightAllocation] = None
    allocations: Optional[List[WeightAllocation]] = None
    rule: RepresentationRule = RepresentationRule(kind="winner_take_all")
    margin: Optional[MarginDistribution] = None
    theta: Optional[MarginDistribution] = None
    noise: Optional[NoiseDistribution] = None
    population_scale: Optional[float] = Field(default=None, gt=0)
    samples: int = Field(default=100_000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    chunk_size: Optional[int] = Field(default=None, ge=1)
    antithetic: bool = False
    alpha: float = Field(default=0.01, gt=0, lt=1)
    n_values: Optional[List[int]] = None
    budget: Optional[int] = Field(default=None, ge=1)
    write_samples: bool = True

    @field_validator("rule")
    @classmethod
    def _valid_rule(cls, rule: RepresentationRule) -> RepresentationRule:
        violations = validate_rule(rule)
        if violations:
            raise ValueError("; ".join(f"{v.code}: {v.message}" for v in violations))
        return rule

    @model_validator(mode="after")
    def _model_inputs(self):
        if self.model == "correlated" and self.margin is None:
            raise ValueError("correlated model needs 'margin'")
        if self.model == "intensity" and (self.theta is None or self.noise is None):
            raise ValueError("intensity model needs 'theta' and 'noise'")
        if self.allocations is not None and len(self.allocations) != 2:
            raise ValueError("'allocations' must hold exactly two allocations")
        if self.n_values is not None:
            if not self.n_values:
                raise ValueError("'n_values' must be nonempty")
            if any(n < 1 for n in self.n_values):
                raise ValueError("'n_values' entries must be positive")
            if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
                raise ValueError("'n_values' must be strictly ascending")
        return self

    def require_allocation(self) -> WeightAllocation:
        if self.allocation is None:
            raise ConfigError("invalid configuration:\n  allocation: field required for this command")
        return self.allocation

    def intensity_model(self) -> IntensityModel:
        return IntensityModel(theta=self.theta, noise=self.noise)

    def indep_model(self, society: Society) -> IndepModel:
        return IndepModel(sizes=society.sizes, rule=self.rule, population_scale=self.population_scale)


def load_config(source: Union[str, Path, dict], overrides: Optional[dict] = None) -> RunConfig:
    """Parse and validate a run config from a path or an already-loaded dict.

    `overrides` (command-line flags) replace top-level keys before validation.
    """
    if isinstance(source, dict):
        raw = source
    else:
        path = Path(source)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = {**raw, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise config_error_from_validation(e)
