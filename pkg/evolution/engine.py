"""Generational loop: selection, inflate/deflate, elitism and per-generation records."""

import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from core.exceptions import DeflateUnavailableError
from core.logging import get_logger
from core.rng import StreamFactory
from evolution.config import EvolutionConfig
from evolution.individual import CompositeIndividual, from_base
from evolution.perturbation import build_perturbation, deflate, inflate
from evolution.trainer import ApotScores, TrainingRecord, aposteriori_train, apriori_train
from network.dataset import Dataset
from network.mlp import random_mlp

logger = get_logger('Evolution')

RESULT_COLUMNS = (
    'run_id', 'generation', 'method', 'train_rmse', 'test_rmse',
    'node_count', 'gen_time_s', 'mut_eval_time_s',
)

INFLATE = "inflate"
DEFLATE = "deflate"
FALLBACK = "fallback"  # deflate drawn on a block-less parent, inflated instead


@dataclass(frozen=True)
class RunRecord:
    """One row per (run, generation); generation 0 is the initial population."""

    run_id: int
    generation: int
    best_train_rmse: float
    best_test_rmse: float
    best_node_count: int
    gen_wall_time_s: float
    mutation_eval_time_s: float
    method: str = "nevo-gspt"
    mean_node_count: float = 0.0
    inflate_count: int = 0
    deflate_count: int = 0
    fallback_count: int = 0
    inflate_eval_time_s: float = 0.0

    def to_row(self) -> Dict[str, object]:
        """Row of the per-generation result table (RESULT_COLUMNS)."""
        return {
            'run_id': self.run_id,
            'generation': self.generation,
            'method': self.method,
            'train_rmse': repr(self.best_train_rmse),
            'test_rmse': repr(self.best_test_rmse),
            'node_count': self.best_node_count,
            'gen_time_s': f"{self.gen_wall_time_s:.6f}",
            'mut_eval_time_s': f"{self.mutation_eval_time_s:.9f}",
        }

    def deterministic_view(self) -> Tuple:
        """Every field except wall-clock timings."""
        return (
            self.run_id, self.generation, self.method, self.best_train_rmse, self.best_test_rmse,
            self.best_node_count, self.mean_node_count, self.inflate_count, self.deflate_count,
            self.fallback_count,
        )


@dataclass(frozen=True, eq=False)
class Population:
    """One generation of individuals; ``best`` is the lowest train RMSE, first index on ties."""

    members: Tuple[CompositeIndividual, ...]
    generation: int = 0
    training_records: Tuple[TrainingRecord, ...] = ()
    best_index: int = field(init=False)

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("a population needs at least one member")
        object.__setattr__(self, "members", members)
        # argmin returns the first (lowest) index on ties
        object.__setattr__(self, "best_index", int(np.argmin(self.train_rmses())))

    def __len__(self) -> int:
        return len(self.members)

    @property
    def best(self) -> CompositeIndividual:
        return self.members[self.best_index]

    def train_rmses(self) -> np.ndarray:
        return np.array([m.train_rmse for m in self.members], dtype=np.float64)

    def mean_node_count(self) -> float:
        return float(np.mean([m.node_count for m in self.members]))


class GenerationStep(NamedTuple):
    population: Population
    record: RunRecord


@dataclass(frozen=True, eq=False)
class ApotOutcome:
    individual: CompositeIndividual
    record: TrainingRecord
    scores: ApotScores


@dataclass(eq=False)
class EvolutionResult:
    """Everything a run produces: final population, best individual, per-generation log,
    gradient-training records and, when enabled, the ApoT outcome."""

    population: Population
    best: CompositeIndividual
    log: List[RunRecord]
    training_records: List[TrainingRecord]
    initial_best_train_rmse: float
    wall_time_s: float
    apot: Optional[ApotOutcome] = None


def init_population(
    cfg: EvolutionConfig,
    train: Dataset,
    test: Dataset,
    streams: Optional[StreamFactory] = None,
) -> Population:
    """Random base networks, optionally AprT-trained, wrapped as individuals.

    Args:
        cfg: Evolution configuration (population size, architecture ranges, AprT)
        train: Training split
        test: Test split
        streams: Random streams of the run; derived from ``cfg.seed`` when omitted

    Returns:
        Generation-0 population carrying the AprT training records
    """
    cfg.validate()
    streams = streams or StreamFactory(cfg.seed)
    networks = [
        random_mlp(train.feature_count, streams("init", i), cfg.architecture)
        for i in range(cfg.population_size)
    ]
    networks, records = apriori_train(networks, cfg.aprt_mode, cfg.aprt_opt, streams("aprt"), data=train)
    members = tuple(
        from_base(net, train, test, lineage_id=f"g0.s{i}") for i, net in enumerate(networks)
    )
    return Population(members, generation=0, training_records=tuple(records))


def tournament_select(
    pop: Population,
    rng: np.random.Generator,
    tournament_size: int = 2,
) -> CompositeIndividual:
    """Best of ``tournament_size`` uniform draws with replacement.

    Args:
        pop: Population to select from
        rng: Stream of the offspring slot being filled
        tournament_size: Number of draws

    Returns:
        The draw with the lowest train RMSE; the earliest draw wins ties
    """
    draws = rng.integers(0, len(pop.members), size=tournament_size)
    winner = pop.members[int(draws[0])]
    for index in draws[1:]:
        candidate = pop.members[int(index)]
        if candidate.train_rmse < winner.train_rmse:
            winner = candidate
    return winner


def _offspring(
    pop: Population,
    slot: int,
    cfg: EvolutionConfig,
    train: Dataset,
    test: Dataset,
    streams: StreamFactory,
) -> Tuple[CompositeIndividual, str, float]:
    generation = pop.generation + 1
    rng = streams("offspring", generation, slot)
    parent = tournament_select(pop, rng, cfg.tournament_size)
    lineage_id = f"g{generation}.s{slot}"
    wants_inflate = rng.random() < cfg.p_inflate

    started = time.perf_counter()
    operation = INFLATE
    if not wants_inflate:
        try:
            child = deflate(parent, int(rng.integers(0, max(1, parent.block_count))), lineage_id)
            operation = DEFLATE
        except DeflateUnavailableError:
            operation = FALLBACK
    if operation != DEFLATE:
        block = build_perturbation(
            parent, train, test, cfg.ms, cfg.span_fraction, rng, cfg.architecture.activation_pool,
        )
        child = inflate(parent, block, lineage_id)
    return child, operation, time.perf_counter() - started


def step_generation(
    pop: Population,
    cfg: EvolutionConfig,
    train: Dataset,
    test: Dataset,
    streams: StreamFactory,
    run_id: int = 0,
    method: str = "nevo-gspt",
    executor: Optional[Executor] = None,
) -> GenerationStep:
    """Produce the next generation: elites copied unchanged, the rest bred.

    Every offspring slot draws from its own stream, so the result does not
    depend on ``executor`` or on the order slots complete in.

    Args:
        pop: Current population
        cfg: Evolution configuration
        train: Training split
        test: Test split
        streams: Random streams of the run
        run_id: Run identifier copied into the record
        method: Method name copied into the record
        executor: Optional thread pool for offspring creation

    Returns:
        GenerationStep with the new population and its RunRecord
    """
    started = time.perf_counter()
    order = np.argsort(pop.train_rmses(), kind="stable")
    elites = [pop.members[int(i)] for i in order[:cfg.elitism_count]]

    slots = range(cfg.elitism_count, cfg.population_size)
    if executor is not None:
        bred = list(executor.map(lambda s: _offspring(pop, s, cfg, train, test, streams), slots))
    else:
        bred = [_offspring(pop, s, cfg, train, test, streams) for s in slots]

    counts = {INFLATE: 0, DEFLATE: 0, FALLBACK: 0}
    inflate_times = []
    for _, operation, elapsed in bred:
        counts[operation] += 1
        if operation != DEFLATE:
            inflate_times.append(elapsed)
    eval_times = [elapsed for _, _, elapsed in bred]

    population = Population(tuple(elites + [child for child, _, _ in bred]), generation=pop.generation + 1)
    best = population.best
    record = RunRecord(
        run_id=run_id,
        generation=population.generation,
        best_train_rmse=best.train_rmse,
        best_test_rmse=best.test_rmse,
        best_node_count=best.node_count,
        gen_wall_time_s=time.perf_counter() - started,
        mutation_eval_time_s=float(np.mean(eval_times)) if eval_times else 0.0,
        method=method,
        mean_node_count=population.mean_node_count(),
        inflate_count=counts[INFLATE],
        deflate_count=counts[DEFLATE],
        fallback_count=counts[FALLBACK],
        inflate_eval_time_s=float(np.mean(inflate_times)) if inflate_times else 0.0,
    )
    return GenerationStep(population, record)


def run_evolution(
    cfg: EvolutionConfig,
    train: Dataset,
    test: Dataset,
    run_id: int = 0,
    method: str = "nevo-gspt",
    on_record: Optional[Callable[[RunRecord], None]] = None,
) -> EvolutionResult:
    """Initialize, evolve for ``cfg.generations`` and optionally apply ApoT.

    A run is a pure function of (cfg, datasets) apart from wall-clock fields.

    Args:
        cfg: Evolution configuration, including the run seed
        train: Training split (inputs already standardized)
        test: Test split, standardized with the training statistics
        run_id: Run identifier for records and log lines
        method: Method name for records
        on_record: Called with every RunRecord as soon as it exists

    Returns:
        EvolutionResult; ``log`` has ``cfg.generations + 1`` records

    Raises:
        ConfigurationError: invalid configuration
        DivergenceError: AprT training diverged
    """
    cfg.validate()
    streams = StreamFactory(cfg.seed)
    run_started = time.perf_counter()

    population = init_population(cfg, train, test, streams)
    initial_records = population.training_records
    initial_best = population.best
    log = [RunRecord(
        run_id=run_id,
        generation=0,
        best_train_rmse=initial_best.train_rmse,
        best_test_rmse=initial_best.test_rmse,
        best_node_count=initial_best.node_count,
        gen_wall_time_s=time.perf_counter() - run_started,
        mutation_eval_time_s=0.0,
        method=method,
        mean_node_count=population.mean_node_count(),
    )]
    if on_record:
        on_record(log[0])
    logger.info(
        f"Run {run_id}: initial best train RMSE {initial_best.train_rmse:.6g} "
        f"(population {cfg.population_size}, AprT {cfg.aprt_mode.value})"
    )

    executor = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for _ in range(cfg.generations):
            population, record = step_generation(
                population, cfg, train, test, streams, run_id=run_id, method=method, executor=executor,
            )
            log.append(record)
            if on_record:
                on_record(record)
            logger.debug(
                f"Run {run_id} gen {record.generation}: train {record.best_train_rmse:.6g} "
                f"test {record.best_test_rmse:.6g} size {record.best_node_count} "
                f"(+{record.inflate_count} -{record.deflate_count} fallback {record.fallback_count})"
            )
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    best = population.best
    training_records = list(initial_records)
    apot = None
    if cfg.apot_enabled:
        tuned, record, scores = aposteriori_train(best, train, test, cfg.apot_opt)
        apot = ApotOutcome(tuned, record, scores)
        training_records.append(record)

    wall_time = time.perf_counter() - run_started
    logger.info(
        f"Run {run_id} finished in {wall_time:.2f}s: best train {best.train_rmse:.6g} "
        f"test {best.test_rmse:.6g} size {best.node_count} ({best.block_count} blocks)"
    )
    return EvolutionResult(
        population=population,
        best=best,
        log=log,
        training_records=training_records,
        initial_best_train_rmse=initial_best.train_rmse,
        wall_time_s=wall_time,
        apot=apot,
    )
