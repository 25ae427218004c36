"""Base experiment class for all ablation modes."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from itertools import combinations
from typing import TYPE_CHECKING, List, Tuple

from core.logging import setup_logger

if TYPE_CHECKING:
    from evolution.config import EvolutionConfig


@dataclass(frozen=True)
class Variant:
    """One configuration compared within an experiment.

    ``methods`` lists the result-table method names a run of this variant
    produces (e.g. the evolved model and its backprop baseline).
    """

    name: str
    cfg: "EvolutionConfig"
    with_baseline: bool = False

    BASELINE_METHOD = "nn"

    @property
    def evolved_methods(self) -> Tuple[str, ...]:
        if self.cfg.apot_enabled:
            return (f"{self.name}-before", f"{self.name}-after")
        return (self.name,)

    @property
    def final_method(self) -> str:
        """Method name of the model the run finally delivers."""
        return self.evolved_methods[-1]

    @property
    def methods(self) -> Tuple[str, ...]:
        if self.with_baseline:
            return self.evolved_methods + (self.BASELINE_METHOD,)
        return self.evolved_methods


class BaseExperiment(ABC):
    """Base class for all experiments (one per ablation mode)."""

    ablation: str = ""

    def __init__(self, base_cfg: "EvolutionConfig"):
        """Initialize base experiment.

        Args:
            base_cfg: Configuration the variants are derived from
        """
        self.base_cfg = base_cfg
        self.logger = setup_logger(
            f"Experiment-{self.ablation}",
            log_file=f"experiment_{self.ablation}.log"
        )

    @abstractmethod
    def variants(self) -> List[Variant]:
        """Configurations to run on every split. Must be implemented by subclasses."""
        pass

    def methods(self) -> List[str]:
        return [method for variant in self.variants() for method in variant.methods]

    def comparisons(self) -> List[Tuple[str, str]]:
        """Method pairs tested with Wilcoxon; every pair by default."""
        return list(combinations(self.methods(), 2))

    def describe(self) -> str:
        names = ', '.join(variant.name for variant in self.variants())
        return f"{self.ablation}: {names}"
