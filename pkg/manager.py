"""Experiment Manager for nevo_gspt - runs benchmark experiments from the command line."""

import argparse
import asyncio
import signal
import sys
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from config.settings import Settings
from core.exceptions import ConfigurationError, IngestionError, NevoError
from core.logging import log_banner, setup_logger
from evolution.config import AprtMode, EvolutionConfig
from harness.experiments import (
    PROBABILITY_GRID,
    SPAN_GRID,
    Ablation,
    ExperimentRecorder,
    ExperimentReport,
    ExperimentSpec,
    RunOutcome,
    RunTask,
    build_experiment,
    execute_run,
    load_experiment_data,
    plan_runs,
)
from harness.ingest import format_splits, load_dataset, monte_carlo_splits, resolve_dataset, verify_shape
from harness.results import ResultWriter
from network.mlp import OptimizerConfig
from utils.helpers import format_mean_std, parse_bool, parse_float_list
from version import get_version

EXIT_OK = 0
EXIT_RUN_FAILURES = 1
EXIT_CONFIG = ConfigurationError.exit_code
EXIT_INGESTION = IngestionError.exit_code

COMPONENT_LOGGERS = ('Evolution', 'Trainer', 'Harness')

# Option name -> parser for manifest values; names are the CLI long flags with '-' as '_'
OPTION_TYPES: Dict[str, Callable[[str], Any]] = {
    'dataset': str,
    'runs': int,
    'generations': int,
    'pop_size': int,
    'ms': float,
    'p_inflate': float,
    'span_fraction': float,
    'aprt': str,
    'apot': parse_bool,
    'tournament_size': int,
    'elitism': int,
    'seed': int,
    'out': str,
    'ablation': str,
    'jobs': int,
    'workers': int,
    'train_fraction': float,
    'learning_rate': float,
    'epochs': int,
    'apot_learning_rate': float,
    'apot_epochs': int,
    'span_grid': parse_float_list,
    'prob_grid': parse_float_list,
    'use_recommended': parse_bool,
}

DEFAULT_OPTIONS: Dict[str, Any] = {
    'dataset': None,
    'runs': 30,
    'generations': 200,
    'pop_size': 100,
    'ms': 2.0,
    'p_inflate': 0.7,
    'span_fraction': 1.0,
    'aprt': AprtMode.HALF.value,
    'apot': False,
    'tournament_size': 2,
    'elitism': 1,
    'seed': Settings.DEFAULT_SEED,
    'out': None,
    'ablation': Ablation.MAIN.value,
    'jobs': Settings.DEFAULT_JOBS,
    'workers': 1,
    'train_fraction': 0.8,
    'learning_rate': 0.01,
    'epochs': 100,
    'apot_learning_rate': 0.001,
    'apot_epochs': 100,
    'span_grid': list(SPAN_GRID),
    'prob_grid': list(PROBABILITY_GRID),
    'use_recommended': False,
}

# registry 'recommended' keys -> option names
RECOMMENDED_KEYS = {'p_inflate': 'p_inflate', 'apot_enabled': 'apot', 'span_fraction': 'span_fraction'}


class ExperimentManager:
    """Runs one experiment: a worker pool for the runs and a single result writer."""

    def __init__(self, spec: ExperimentSpec):
        """Initialize Experiment Manager.

        Args:
            spec: Validated experiment settings
        """
        self.logger = setup_logger('ExperimentManager', log_file='experiment_manager.log')
        self.spec = spec
        self._shutdown_event = asyncio.Event()
        self.poll_interval = 0.5  # seconds between shutdown checks while runs are pending

    def setup_signal_handlers(self):
        """Set up signal handlers for graceful shutdown."""
        for sig in (signal.SIGINT, signal.SIGTERM):
            signal.signal(sig, self._signal_handler)

    def _signal_handler(self, signum, frame):
        """Handle shutdown signals.

        Args:
            signum: Signal number
            frame: Current stack frame
        """
        self.logger.info(f"Received signal {signum}, finishing running jobs and stopping...")
        # Thread-safe event set from synchronous signal handler
        try:
            loop = asyncio.get_running_loop()
            loop.call_soon_threadsafe(self._shutdown_event.set)
        except RuntimeError:
            # No running loop, set directly
            self._shutdown_event.set()

    def request_shutdown(self):
        self._shutdown_event.set()

    def _make_executor(self) -> Executor:
        if self.spec.jobs == 1:
            # in-process; the thread only keeps the event loop responsive
            return ThreadPoolExecutor(max_workers=1)
        return ProcessPoolExecutor(max_workers=self.spec.jobs)

    async def _write_results(self, queue: "asyncio.Queue[Optional[RunOutcome]]", recorder: ExperimentRecorder):
        """Single writer: every outcome goes through here, in arrival order."""
        while True:
            outcome = await queue.get()
            if outcome is None:
                break
            recorder.record(outcome)
            if outcome.ok:
                finals = ', '.join(f"{f.method} test {f.test_rmse:.6g}" for f in outcome.finals)
                self.logger.info(f"✓ Run {outcome.run_id} [{outcome.variant}] {finals}")
            else:
                self.logger.error(
                    f"✗ Run {outcome.run_id} [{outcome.variant}] {outcome.error_type}: {outcome.error_message}"
                )

    async def _dispatch(self, tasks: List[RunTask], queue: "asyncio.Queue[Optional[RunOutcome]]"):
        loop = asyncio.get_running_loop()
        executor = self._make_executor()
        pending = {loop.run_in_executor(executor, execute_run, task): task for task in tasks}
        try:
            while pending:
                done, _ = await asyncio.wait(
                    pending.keys(), timeout=self.poll_interval, return_when=asyncio.FIRST_COMPLETED
                )
                for future in done:
                    task = pending.pop(future)
                    try:
                        outcome = future.result()
                    except Exception as e:
                        # the worker itself died (e.g. a broken process pool)
                        outcome = RunOutcome(task.run_id, task.variant.name, error_type=type(e).__name__,
                                             error_message=str(e))
                    await queue.put(outcome)

                if self._shutdown_event.is_set() and pending:
                    self.logger.warning(f"Shutdown requested, abandoning {len(pending)} pending runs")
                    for future, task in pending.items():
                        future.cancel()
                        await queue.put(RunOutcome(task.run_id, task.variant.name, error_type="Interrupted",
                                                   error_message="run cancelled by shutdown"))
                    pending.clear()
        finally:
            executor.shutdown(wait=True, cancel_futures=True)

    async def run(self) -> ExperimentReport:
        """Run the experiment and write every result file."""
        spec = self.spec.validate()
        experiment = build_experiment(spec)
        data = load_experiment_data(spec)
        writer = ResultWriter(spec.output_dir)
        writer.clear()
        splits, tasks = plan_runs(spec, experiment, data)
        writer.write_splits(splits)

        self._display_startup_summary(experiment, data, len(tasks))
        recorder = ExperimentRecorder(spec, experiment, writer)
        queue: "asyncio.Queue[Optional[RunOutcome]]" = asyncio.Queue()
        writer_task = asyncio.create_task(self._write_results(queue, recorder))
        try:
            await self._dispatch(tasks, queue)
        finally:
            await queue.put(None)
            await writer_task

        report = recorder.finalize()
        self._display_final_summary(recorder, report, writer)
        return report

    def _display_startup_summary(self, experiment, data, run_count: int):
        """Display startup summary."""
        spec = self.spec
        self.logger.info("")
        log_banner(self.logger, f"EXPERIMENT {experiment.describe()}")
        self.logger.info(f"Dataset: {spec.label} ({data.row_count} rows x {data.feature_count} features)")
        self.logger.info(f"Runs: {spec.runs} per variant, {run_count} total, {spec.jobs} jobs")
        for key, value in spec.cfg.describe().items():
            self.logger.info(f"  {key}: {value}")
        self.logger.info(f"Output: {spec.output_dir}")
        self.logger.info("=" * 80)

    def _display_final_summary(self, recorder: ExperimentRecorder, report: ExperimentReport, writer: ResultWriter):
        log_banner(self.logger, "RESULTS")
        for method, times in recorder.total_times.items():
            test_rmse = list(recorder.test_rmse.get(method, {}).values())
            self.logger.info(
                f"{method}: test RMSE {format_mean_std(test_rmse)}, "
                f"total time {format_mean_std(times, decimals=2, unit='s')}"
            )
        self.logger.info(f"Completed {report.completed}, failed {report.failed}")
        self.logger.info(f"Tables: {writer.summary() or 'none'}")
        self.logger.info("=" * 80)


# ---- option handling ----

def parse_manifest(path: str) -> Dict[str, Any]:
    """Typed options from a key=value manifest; unknown keys are a configuration error."""
    if not Path(path).is_file():
        raise ConfigurationError(f"manifest not found: {path}")
    raw = Settings.load_experiment_manifest(path)
    options = {}
    for key, value in raw.items():
        key = key.replace('-', '_')
        if key not in OPTION_TYPES:
            raise ConfigurationError(f"unknown manifest key '{key}' in {path}")
        try:
            options[key] = OPTION_TYPES[key](value)
        except ValueError as e:
            raise ConfigurationError(f"bad value for '{key}' in {path}: {e}") from e
    return options


def merge_options(cli: Dict[str, Any]) -> Dict[str, Any]:
    """defaults < registry recommendations < manifest < CLI flags."""
    manifest = parse_manifest(cli['config']) if cli.get('config') else {}
    given = {k: v for k, v in cli.items() if k in OPTION_TYPES and v is not None}

    options = dict(DEFAULT_OPTIONS)
    dataset = given.get('dataset', manifest.get('dataset'))
    if given.get('use_recommended', manifest.get('use_recommended', False)) and dataset:
        _, entry = resolve_dataset(dataset)
        for key, value in (entry.get('recommended') or {}).items():
            if key in RECOMMENDED_KEYS:
                options[RECOMMENDED_KEYS[key]] = value
    options.update(manifest)
    options.update(given)
    return options


def build_spec(options: Dict[str, Any]) -> ExperimentSpec:
    """Turn merged options into a validated ExperimentSpec."""
    if not options.get('dataset'):
        raise ConfigurationError("no dataset given (--dataset or 'dataset' in the manifest)")
    path, entry = resolve_dataset(options['dataset'])
    label = Path(options['dataset']).stem if not entry else Path(entry.get('file', path.name)).stem
    try:
        aprt_mode = AprtMode(str(options['aprt']).lower())
        ablation = Ablation(str(options['ablation']).lower())
    except ValueError as e:
        raise ConfigurationError(str(e)) from e

    cfg = EvolutionConfig(
        population_size=options['pop_size'],
        generations=options['generations'],
        ms=options['ms'],
        p_inflate=options['p_inflate'],
        span_fraction=options['span_fraction'],
        aprt_mode=aprt_mode,
        apot_enabled=bool(options['apot']),
        tournament_size=options['tournament_size'],
        elitism_count=options['elitism'],
        seed=options['seed'],
        aprt_opt=OptimizerConfig(learning_rate=options['learning_rate'], epochs=options['epochs']),
        apot_opt=OptimizerConfig(learning_rate=options['apot_learning_rate'], epochs=options['apot_epochs']),
        workers=options['workers'],
    )
    output_dir = options['out'] or str(Path(Settings.RESULTS_DIR) / f"{label}__{ablation.value}")
    spec = ExperimentSpec(
        dataset_path=Path(path),
        runs=options['runs'],
        train_fraction=options['train_fraction'],
        cfg=cfg,
        ablation=ablation,
        output_dir=Path(output_dir),
        dataset_name=label,
        jobs=Settings.resolve_jobs(options['jobs']),
        span_grid=tuple(options['span_grid']),
        probability_grid=tuple(options['prob_grid']),
    )
    return spec.validate()


# ---- subcommands ----

async def run_command(args: argparse.Namespace) -> int:
    spec = build_spec(merge_options(vars(args)))
    manager = ExperimentManager(spec)
    manager.setup_signal_handlers()
    report = await manager.run()
    return report.exit_code


def verify_data_command(args: argparse.Namespace) -> int:
    """Load every registered (or the named) dataset present and check its shape."""
    logger = setup_logger('ExperimentManager', log_file='experiment_manager.log')
    names = [args.dataset] if args.dataset else Settings.get_all_datasets()
    status = EXIT_OK
    for name in names:
        path, entry = resolve_dataset(name)
        if not entry:
            logger.error(f"'{name}' is not a registered dataset")
            status = EXIT_CONFIG
            continue
        if not path.is_file():
            logger.warning(f"- {name}: {path} not found (see DATASETS.md)")
            continue
        try:
            data = load_dataset(path, name=name)
            verify_shape(data, entry)
            logger.info(f"✓ {name}: {data.row_count} rows x {data.feature_count} features")
        except IngestionError as e:
            logger.error(f"✗ {name}: {e}")
            status = EXIT_INGESTION
    return status


def splits_command(args: argparse.Namespace) -> int:
    """Print the Monte Carlo split index lists of a dataset."""
    path, entry = resolve_dataset(args.dataset)
    data = load_dataset(path)
    verify_shape(data, entry)
    seed = Settings.DEFAULT_SEED if args.seed is None else args.seed
    splits = monte_carlo_splits(data, args.runs, args.train_fraction, seed)
    print("run_id,part,indices")
    for line in format_splits(splits):
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='nevo-gspt',
        description='Neuroevolution with geometric semantic perturbations: benchmark harness',
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {get_version()}")
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='run an experiment')
    run.add_argument('--config', help='key=value experiment manifest (CLI flags win)')
    run.add_argument('--dataset', help='dataset file path or registry name')
    run.add_argument('--runs', type=int)
    run.add_argument('--generations', type=int)
    run.add_argument('--pop-size', type=int)
    run.add_argument('--ms', type=float, help='mutation step')
    run.add_argument('--p-inflate', type=float)
    run.add_argument('--span-fraction', type=float)
    run.add_argument('--aprt', choices=[mode.value for mode in AprtMode])
    run.add_argument('--apot', action=argparse.BooleanOptionalAction, default=None,
                     help='a-posteriori backprop tuning of the best model')
    run.add_argument('--tournament-size', type=int)
    run.add_argument('--elitism', type=int)
    run.add_argument('--seed', type=int)
    run.add_argument('--out', help='output directory')
    run.add_argument('--ablation', choices=[a.value for a in Ablation])
    run.add_argument('--jobs', type=int, help='parallel runs (0 = all cores)')
    run.add_argument('--workers', type=int, help='threads for offspring creation within a run')
    run.add_argument('--train-fraction', type=float)
    run.add_argument('--learning-rate', type=float, help='AprT and baseline learning rate')
    run.add_argument('--epochs', type=int, help='AprT and baseline epochs')
    run.add_argument('--apot-learning-rate', type=float)
    run.add_argument('--apot-epochs', type=int)
    run.add_argument('--span-grid', type=parse_float_list, help='span fractions for --ablation span')
    run.add_argument('--prob-grid', type=parse_float_list, help='inflate probabilities for --ablation prob')
    run.add_argument('--use-recommended', action=argparse.BooleanOptionalAction, default=None,
                     help="apply the dataset registry's recommended settings")

    verify = sub.add_parser('verify-data', help='check registered datasets against their expected shapes')
    verify.add_argument('--dataset', help='registry name (default: all)')

    splits = sub.add_parser('splits', help='print Monte Carlo split indices')
    splits.add_argument('--dataset', required=True)
    splits.add_argument('--runs', type=int, default=30)
    splits.add_argument('--train-fraction', type=float, default=0.8)
    splits.add_argument('--seed', type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    for name in COMPONENT_LOGGERS:
        setup_logger(name)
    logger = setup_logger('ExperimentManager', log_file='experiment_manager.log')
    try:
        if args.command == 'run':
            return asyncio.run(run_command(args))
        if args.command == 'verify-data':
            return verify_data_command(args)
        return splits_command(args)
    except NevoError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == '__main__':
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nShutdown complete")
        sys.exit(EXIT_RUN_FAILURES)
