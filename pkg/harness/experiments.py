"""Experiment plans for each ablation mode and the per-run execution unit.

A run executes one variant on one Monte Carlo split. Runs are independent
and picklable so the experiment manager can spread them over processes;
``run_experiment`` executes them in-process.
"""

import time
import traceback
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Type

from core.base_experiment import BaseExperiment, Variant
from core.exceptions import ConfigurationError
from core.logging import get_logger
from core.rng import mix, stream
from evolution.config import AprtMode, EvolutionConfig
from evolution.engine import RunRecord, run_evolution
from evolution.individual import CompositeIndividual
from evolution.trainer import TrainingRecord, baseline_nn, derive_baseline_architecture
from harness.ingest import Split, load_dataset, monte_carlo_splits, resolve_dataset, verify_shape
from harness.results import FinalResult, ResultWriter, timing_report
from harness.stats import MIN_PAIRS, wilcoxon_signed_rank
from network.dataset import Dataset
from utils.helpers import median_improvement

logger = get_logger('Harness')

PROBABILITY_GRID = (0.3, 0.5, 0.7, 1.0)
SPAN_GRID = (0.3, 0.5, 0.7, 1.0)
MIN_WILCOXON_RUNS = MIN_PAIRS


class Ablation(str, Enum):
    MAIN = "main"
    APRT = "aprt"
    APOT = "apot"
    PROB = "prob"
    SPAN = "span"


@dataclass(frozen=True)
class ExperimentSpec:
    dataset_path: Path
    runs: int = 30
    train_fraction: float = 0.8
    cfg: EvolutionConfig = field(default_factory=EvolutionConfig)
    ablation: Ablation = Ablation.MAIN
    output_dir: Path = Path("results")
    dataset_name: str = ""
    jobs: int = 1
    span_grid: Tuple[float, ...] = SPAN_GRID
    probability_grid: Tuple[float, ...] = PROBABILITY_GRID

    @property
    def label(self) -> str:
        return self.dataset_name or Path(self.dataset_path).stem

    def validate(self) -> "ExperimentSpec":
        if self.runs < 1:
            raise ConfigurationError(f"runs must be >= 1, got {self.runs}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not isinstance(self.ablation, Ablation):
            raise ConfigurationError(f"unknown ablation {self.ablation!r}")
        if self.jobs < 1:
            raise ConfigurationError(f"jobs must be >= 1, got {self.jobs}")
        if not self.span_grid or not self.probability_grid:
            raise ConfigurationError("ablation grids must not be empty")
        self.cfg.validate()
        return self


# ---- experiments ----

class MainComparison(BaseExperiment):
    """NEVO-GSPT against a backprop network of the same node budget."""

    ablation = Ablation.MAIN.value

    def variants(self) -> List[Variant]:
        return [Variant("nevo-gspt", self.base_cfg, with_baseline=True)]

    def comparisons(self) -> List[Tuple[str, str]]:
        variant = self.variants()[0]
        return [(variant.final_method, Variant.BASELINE_METHOD)]


class AprtExperiment(BaseExperiment):
    ablation = Ablation.APRT.value

    def variants(self) -> List[Variant]:
        return [
            Variant(f"aprt-{mode.value}", self.base_cfg.with_overrides(aprt_mode=mode, apot_enabled=False))
            for mode in AprtMode
        ]


class ApotExperiment(BaseExperiment):
    """The same evolved model before and after a posteriori training."""

    ablation = Ablation.APOT.value

    def variants(self) -> List[Variant]:
        return [Variant("apot", self.base_cfg.with_overrides(apot_enabled=True))]


class ProbabilityExperiment(BaseExperiment):
    ablation = Ablation.PROB.value

    def __init__(self, base_cfg: EvolutionConfig, grid: Sequence[float] = PROBABILITY_GRID):
        super().__init__(base_cfg)
        self.grid = tuple(grid)

    def variants(self) -> List[Variant]:
        return [
            Variant(f"pinf-{p:g}", self.base_cfg.with_overrides(p_inflate=float(p), apot_enabled=False))
            for p in self.grid
        ]


class SpanExperiment(BaseExperiment):
    ablation = Ablation.SPAN.value

    def __init__(self, base_cfg: EvolutionConfig, grid: Sequence[float] = SPAN_GRID):
        super().__init__(base_cfg)
        self.grid = tuple(grid)

    def variants(self) -> List[Variant]:
        return [
            Variant(f"span-{s:g}", self.base_cfg.with_overrides(span_fraction=float(s), apot_enabled=False))
            for s in self.grid
        ]


EXPERIMENTS: Dict[Ablation, Type[BaseExperiment]] = {
    Ablation.MAIN: MainComparison,
    Ablation.APRT: AprtExperiment,
    Ablation.APOT: ApotExperiment,
    Ablation.PROB: ProbabilityExperiment,
    Ablation.SPAN: SpanExperiment,
}


def build_experiment(spec: ExperimentSpec) -> BaseExperiment:
    if spec.ablation is Ablation.PROB:
        return ProbabilityExperiment(spec.cfg, spec.probability_grid)
    if spec.ablation is Ablation.SPAN:
        return SpanExperiment(spec.cfg, spec.span_grid)
    return EXPERIMENTS[spec.ablation](spec.cfg)


# ---- single runs ----

def run_seed(master_seed: int, run_id: int) -> int:
    """Evolution seed of run ``run_id``; shared by every variant for paired comparisons."""
    return mix(master_seed, "run", run_id) & 0x7FFFFFFF


@dataclass(frozen=True, eq=False)
class RunTask:
    run_id: int
    variant: Variant
    split: Split
    data: Dataset
    master_seed: int


@dataclass(eq=False)
class RunOutcome:
    run_id: int
    variant: str
    finals: List[FinalResult] = field(default_factory=list)
    logs: Dict[str, List[RunRecord]] = field(default_factory=dict)
    models: Dict[str, CompositeIndividual] = field(default_factory=dict)
    baseline_records: List[TrainingRecord] = field(default_factory=list)
    error_type: Optional[str] = None
    error_message: str = ""

    @property
    def ok(self) -> bool:
        return self.error_type is None


def execute_run(task: RunTask) -> RunOutcome:
    """Run one variant on one split. Failures are returned, never raised."""
    variant = task.variant
    outcome = RunOutcome(task.run_id, variant.name)
    try:
        train, test = task.split.apply(task.data)
        cfg = variant.cfg.with_overrides(seed=run_seed(task.master_seed, task.run_id))
        result = run_evolution(cfg, train, test, run_id=task.run_id, method=variant.evolved_methods[0])

        evolved = variant.evolved_methods[0]
        apot_time = result.apot.record.wall_time if result.apot is not None else 0.0
        outcome.logs[evolved] = result.log
        outcome.models[evolved] = result.best
        outcome.finals.append(FinalResult(
            task.run_id, evolved, result.best.train_rmse, result.best.test_rmse,
            result.best.node_count, result.wall_time_s - apot_time,
        ))
        if result.apot is not None:
            tuned = result.apot.individual
            outcome.models[variant.final_method] = tuned
            outcome.finals.append(FinalResult(
                task.run_id, variant.final_method, tuned.train_rmse, tuned.test_rmse,
                tuned.node_count, result.wall_time_s,
            ))

        if variant.with_baseline:
            source = result.apot.individual if result.apot is not None else result.best
            architecture = derive_baseline_architecture(source)
            baseline = baseline_nn(
                architecture, train, test, cfg.aprt_opt, stream(task.master_seed, "baseline", task.run_id),
            )
            outcome.baseline_records.append(baseline.record)
            outcome.finals.append(FinalResult(
                task.run_id, Variant.BASELINE_METHOD, baseline.train_rmse, baseline.test_rmse,
                architecture.node_count, baseline.record.wall_time,
            ))
    except Exception as e:
        logger.error(f"Run {task.run_id} ({variant.name}) failed: {e}", exc_info=True)
        outcome.error_type = type(e).__name__
        outcome.error_message = str(e) or traceback.format_exc(limit=1)
    return outcome


# ---- bookkeeping ----

@dataclass
class ExperimentReport:
    output_dir: Path
    started: int = 0
    completed: int = 0
    failed: int = 0

    @property
    def exit_code(self) -> int:
        return 0 if self.failed == 0 and self.completed > 0 else 1


class ExperimentRecorder:
    """Writes run outcomes as they arrive and the cross-run tables at the end."""

    def __init__(self, spec: ExperimentSpec, experiment: BaseExperiment, writer: ResultWriter):
        self.spec = spec
        self.experiment = experiment
        self.writer = writer
        self.report = ExperimentReport(writer.output_dir)
        self.test_rmse: Dict[str, Dict[int, float]] = {}
        self.logs: Dict[str, List[List[RunRecord]]] = {}
        self.total_times: Dict[str, List[float]] = {}
        self.baseline_records: List[TrainingRecord] = []

    def record(self, outcome: RunOutcome) -> None:
        self.report.started += 1
        label, ablation = self.spec.label, self.experiment.ablation
        if not outcome.ok:
            self.report.failed += 1
            self.experiment.logger.warning(
                f"Run {outcome.run_id} ({outcome.variant}) failed: {outcome.error_type}: {outcome.error_message}"
            )
            self.writer.write_error(outcome.run_id, outcome.variant, outcome.error_type, outcome.error_message)
            return
        self.report.completed += 1
        for method, log in outcome.logs.items():
            self.writer.write_generations(label, ablation, method, log)
            self.logs.setdefault(method, []).append(log)
        for final in outcome.finals:
            self.writer.write_final(label, ablation, final)
            self.test_rmse.setdefault(final.method, {})[final.run_id] = final.test_rmse
            self.total_times.setdefault(final.method, []).append(final.total_time_s)
        for method, model in outcome.models.items():
            self.writer.write_model(method, outcome.run_id, model)
        self.baseline_records.extend(outcome.baseline_records)

    def finalize(self) -> ExperimentReport:
        for method, logs in self.logs.items():
            improvement = median_improvement(
                [log[0].best_train_rmse for log in logs], [log[-1].best_train_rmse for log in logs],
            )
            if improvement is not None:
                self.experiment.logger.info(
                    f"{method}: median best train RMSE {improvement:.1%} below the initial population"
                )

        for method in self.experiment.methods():
            if method not in self.total_times:
                continue
            baseline = self.baseline_records if method == Variant.BASELINE_METHOD else ()
            summary = timing_report(self.logs.get(method, []), self.total_times[method], baseline)
            self.writer.write_timing(method, summary)

        rows = []
        for method_a, method_b in self.experiment.comparisons():
            a, b = self.test_rmse.get(method_a, {}), self.test_rmse.get(method_b, {})
            paired = sorted(set(a) & set(b))
            if len(paired) < MIN_WILCOXON_RUNS:
                self.experiment.logger.warning(
                    f"Skipping Wilcoxon {method_a} vs {method_b}: {len(paired)} paired runs "
                    f"(need {MIN_WILCOXON_RUNS})"
                )
                continue
            result = wilcoxon_signed_rank([a[r] for r in paired], [b[r] for r in paired])
            rows.append({
                'method_a': method_a,
                'method_b': method_b,
                'n': len(paired),
                'statistic': repr(result.statistic),
                'p_value': repr(result.p_value),
                'exact': result.exact,
                'degenerate': result.degenerate,
            })
        if rows:
            self.writer.write_wilcoxon(rows)
        return self.report


def load_experiment_data(spec: ExperimentSpec) -> Dataset:
    """Load the dataset file, checking registered shapes when the file is known."""
    _, entry = resolve_dataset(str(spec.dataset_path))
    data = load_dataset(spec.dataset_path, name=spec.label)
    verify_shape(data, entry)
    return data


def plan_runs(spec: ExperimentSpec, experiment: BaseExperiment, data: Dataset) -> Tuple[List[Split], List[RunTask]]:
    splits = monte_carlo_splits(data, spec.runs, spec.train_fraction, spec.cfg.seed)
    tasks = [
        RunTask(split.run_id, variant, split, data, spec.cfg.seed)
        for variant in experiment.variants()
        for split in splits
    ]
    return splits, tasks


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Execute every run of the experiment in-process and write all result files."""
    spec.validate()
    experiment = build_experiment(spec)
    data = load_experiment_data(spec)
    writer = ResultWriter(spec.output_dir)
    writer.clear()
    splits, tasks = plan_runs(spec, experiment, data)
    writer.write_splits(splits)
    experiment.logger.info(
        f"Experiment {experiment.describe()} on {spec.label} ({data.row_count}x{data.feature_count}), "
        f"{len(tasks)} runs"
    )

    recorder = ExperimentRecorder(spec, experiment, writer)
    started = time.perf_counter()
    for task in tasks:
        recorder.record(execute_run(task))
    report = recorder.finalize()
    experiment.logger.info(
        f"Experiment finished in {time.perf_counter() - started:.1f}s: "
        f"{report.completed} completed, {report.failed} failed"
    )
    return report
