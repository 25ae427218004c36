"""Composite individuals, inflate/deflate mutations and the evolutionary loop."""

from .config import AprtMode, EvolutionConfig
from .engine import Population, RunRecord, init_population, run_evolution, step_generation, tournament_select
from .individual import CompositeIndividual, evaluate_incremental, from_base, materialize, size
from .perturbation import build_perturbation, deflate, inflate
from .trainer import aposteriori_train, apriori_train, baseline_nn

__all__ = [
    'AprtMode', 'EvolutionConfig', 'Population', 'RunRecord', 'init_population', 'run_evolution',
    'step_generation', 'tournament_select', 'CompositeIndividual', 'evaluate_incremental',
    'from_base', 'materialize', 'size', 'build_perturbation', 'deflate', 'inflate',
    'aposteriori_train', 'apriori_train', 'baseline_nn',
]
