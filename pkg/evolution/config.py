"""Tunables of an evolutionary run."""

from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict

from core.exceptions import ConfigurationError
from evolution.perturbation import validate_mutation_step, validate_span_fraction
from network.mlp import ArchitectureConfig, OptimizerConfig


class AprtMode(str, Enum):
    """Which initial networks are backprop-trained before evolution."""

    NONE = "none"
    HALF = "half"
    ALL = "all"


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 100
    generations: int = 200
    ms: float = 2.0
    p_inflate: float = 0.7
    span_fraction: float = 1.0
    aprt_mode: AprtMode = AprtMode.HALF
    apot_enabled: bool = False
    tournament_size: int = 2
    elitism_count: int = 1
    seed: int = 0
    aprt_opt: OptimizerConfig = field(default_factory=OptimizerConfig)
    apot_opt: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(learning_rate=0.001))
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    workers: int = 1

    @property
    def p_deflate(self) -> float:
        return 1.0 - self.p_inflate

    def validate(self) -> "EvolutionConfig":
        if self.population_size < 2:
            raise ConfigurationError(f"population_size must be >= 2, got {self.population_size}")
        if self.generations < 0:
            raise ConfigurationError(f"generations must be >= 0, got {self.generations}")
        validate_mutation_step(self.ms)
        if not 0.0 <= self.p_inflate <= 1.0:
            raise ConfigurationError(f"p_inflate must be in [0, 1], got {self.p_inflate}")
        validate_span_fraction(self.span_fraction)
        if not isinstance(self.aprt_mode, AprtMode):
            raise ConfigurationError(f"unknown AprT mode {self.aprt_mode!r}")
        if self.tournament_size < 1:
            raise ConfigurationError(f"tournament_size must be >= 1, got {self.tournament_size}")
        if not 0 <= self.elitism_count < self.population_size:
            raise ConfigurationError(
                f"elitism_count must be in [0, population_size), got {self.elitism_count}"
            )
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        self.aprt_opt.validate()
        self.apot_opt.validate()
        self.architecture.validate()
        return self

    def with_overrides(self, **overrides: Any) -> "EvolutionConfig":
        return replace(self, **overrides)

    def describe(self) -> Dict[str, Any]:
        """Flat, printable view (enums as their values)."""
        data = asdict(self)
        data["aprt_mode"] = self.aprt_mode.value
        data["architecture"]["activation_pool"] = [a.value for a in self.architecture.activation_pool]
        return data
