"""Result tables, timing summaries and best-model dumps."""

import csv
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from core.exceptions import IngestionError
from core.logging import get_logger
from evolution.blocks import ChainNeuron, ChainUnit
from evolution.engine import RESULT_COLUMNS, RunRecord
from evolution.individual import CompositeIndividual, MaterializedNetwork, materialize
from evolution.trainer import TrainingRecord
from harness.ingest import Split, format_splits
from network.activations import Activation
from network.mlp import DenseLayer, MlpNetwork
from version import MODEL_FORMAT_VERSION, get_version

logger = get_logger('Harness')

FINAL_COLUMNS = ('run_id', 'method', 'train_rmse', 'test_rmse', 'node_count', 'total_time_s')
ERROR_COLUMNS = ('run_id', 'method', 'error_type', 'message')
WILCOXON_COLUMNS = ('method_a', 'method_b', 'n', 'statistic', 'p_value', 'exact', 'degenerate')
TIMING_COLUMNS = ('method', 'quantity', 'count', 'mean', 'std')
SPLIT_COLUMNS = ('run_id', 'part', 'indices')

MODEL_MAGIC = "nevo-gspt-model"


@dataclass(frozen=True)
class FinalResult:
    """Final row of one run for one method."""

    run_id: int
    method: str
    train_rmse: float
    test_rmse: float
    node_count: int
    total_time_s: float

    def to_row(self) -> Dict[str, object]:
        return {
            'run_id': self.run_id,
            'method': self.method,
            'train_rmse': repr(self.train_rmse),
            'test_rmse': repr(self.test_rmse),
            'node_count': self.node_count,
            'total_time_s': f"{self.total_time_s:.6f}",
        }


# ---- timing ----

@dataclass(frozen=True)
class StatSummary:
    """Count, mean and sample standard deviation of one timing quantity."""

    count: int
    mean: float
    std: float

    @property
    def empty(self) -> bool:
        return self.count == 0

    @classmethod
    def of(cls, values: Iterable[float]) -> "StatSummary":
        """Summarize ``values``; an empty sample gives count 0 and NaN statistics."""
        values = np.asarray(list(values), dtype=np.float64)
        if values.size == 0:
            return cls(0, float('nan'), float('nan'))
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        return cls(int(values.size), float(values.mean()), std)


@dataclass(frozen=True)
class TimingSummary:
    """Mean/std of total run time, per-generation time, per-offspring
    mutation evaluation (all and inflate only) and baseline per-epoch backprop."""

    quantities: Dict[str, StatSummary] = field(default_factory=dict)

    def __getitem__(self, quantity: str) -> StatSummary:
        return self.quantities[quantity]

    def rows(self, method: str) -> List[Dict[str, object]]:
        """Rows of ``timing.csv`` for ``method``; empty quantities leave mean and std blank."""
        return [
            {
                'method': method,
                'quantity': quantity,
                'count': summary.count,
                'mean': '' if summary.empty else f"{summary.mean:.9f}",
                'std': '' if summary.empty else f"{summary.std:.9f}",
            }
            for quantity, summary in self.quantities.items()
        ]


def timing_report(
    logs: Sequence[Sequence[RunRecord]],
    total_times: Sequence[float],
    baseline_records: Sequence[TrainingRecord] = (),
) -> TimingSummary:
    """Summarize timing over runs.

    Generation 0 (initialization) is excluded from the per-generation and
    per-offspring figures; with zero generations those are flagged empty.
    """
    evolved = [record for log in logs for record in log if record.generation > 0]
    inflating = [r for r in evolved if r.inflate_count + r.fallback_count > 0]
    epochs = [
        record.seconds_per_epoch for record in baseline_records
        if record.seconds_per_epoch is not None
    ]
    return TimingSummary({
        'total_time_s': StatSummary.of(total_times),
        'gen_time_s': StatSummary.of(r.gen_wall_time_s for r in evolved),
        'mut_eval_time_s': StatSummary.of(r.mutation_eval_time_s for r in evolved),
        'inflate_eval_time_s': StatSummary.of(r.inflate_eval_time_s for r in inflating),
        'backprop_epoch_time_s': StatSummary.of(epochs),
    })


# ---- model dumps ----

def _floats(values: Iterable[float]) -> str:
    return ' '.join(repr(float(v)) for v in values)


def dump_model(model: Union[CompositeIndividual, MaterializedNetwork]) -> str:
    """Self-describing text dump of a composite model (floats round-trip exactly)."""
    if isinstance(model, CompositeIndividual):
        model = materialize(model)
    base = model.base
    lines = [
        f"{MODEL_MAGIC} {MODEL_FORMAT_VERSION}",
        f"version {get_version()}",
        f"input_dim {base.input_dim}",
        f"base_layers {len(base.layers)}",
    ]
    for i, layer in enumerate(base.layers):
        lines.append(f"layer {i} {layer.out_dim} {layer.in_dim}")
        lines.append("activations " + ' '.join(a.value for a in layer.activations))
        lines.extend(f"w {_floats(row)}" for row in layer.weights)
        lines.append(f"b {_floats(layer.bias)}")
    lines.append(f"blocks {len(model.units)}")
    for j, unit in enumerate(model.units):
        lines.append(f"block {j} {unit.depth_span} {unit.output_weight!r}")
        for i, neuron in enumerate(unit.chain):
            chain_weight = '-' if neuron.chain_weight is None else repr(neuron.chain_weight)
            lines.append(f"neuron {i} {neuron.activation.value} {chain_weight} {neuron.bias!r}")
            lines.append(f"v {_floats(neuron.input_weights)}")
    lines.append("end")
    return '\n'.join(lines) + '\n'


class _LineReader:
    def __init__(self, text: str, source: str):
        self.lines = text.splitlines()
        self.position = 0
        self.source = source

    def expect(self, keyword: str) -> List[str]:
        while self.position < len(self.lines) and not self.lines[self.position].strip():
            self.position += 1
        if self.position >= len(self.lines):
            raise IngestionError(f"unexpected end of model, expected '{keyword}'", path=self.source)
        self.position += 1
        tokens = self.lines[self.position - 1].split()
        if tokens[0] != keyword:
            raise IngestionError(
                f"expected '{keyword}', found '{tokens[0]}'", row=self.position, path=self.source
            )
        return tokens[1:]

    def floats(self, keyword: str, count: int) -> np.ndarray:
        tokens = self.expect(keyword)
        if len(tokens) != count:
            raise IngestionError(
                f"'{keyword}' line has {len(tokens)} values, expected {count}",
                row=self.position, path=self.source,
            )
        try:
            return np.array([float(t) for t in tokens], dtype=np.float64)
        except ValueError as e:
            raise IngestionError(str(e), row=self.position, path=self.source) from e


def load_model(source: Union[str, Path]) -> MaterializedNetwork:
    """Parse a dump (text, or a path to one) back into an evaluable network."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.startswith(MODEL_MAGIC)):
        path = Path(source)
        text, origin = path.read_text(), str(path)
    else:
        text, origin = source, "<model>"
    reader = _LineReader(text, origin)
    try:
        header = reader.expect(MODEL_MAGIC)
        if int(header[0]) != MODEL_FORMAT_VERSION:
            raise IngestionError(f"unsupported model format {header[0]}", path=origin)
        reader.expect("version")
        input_dim = int(reader.expect("input_dim")[0])
        layers = []
        for _ in range(int(reader.expect("base_layers")[0])):
            _, out_dim, in_dim = (int(t) for t in reader.expect("layer"))
            activations = tuple(Activation.parse(name) for name in reader.expect("activations"))
            weights = np.vstack([reader.floats("w", in_dim) for _ in range(out_dim)])
            bias = reader.floats("b", out_dim)
            layers.append(DenseLayer(weights, bias, activations))
        base = MlpNetwork(input_dim, tuple(layers))

        units = []
        activations_by_layer = [input_dim] + [layer.out_dim for layer in layers]
        for _ in range(int(reader.expect("blocks")[0])):
            _, span, output_weight = reader.expect("block")
            chain = []
            for j in range(int(span)):
                _, activation, chain_weight, bias = reader.expect("neuron")
                input_weights = reader.floats("v", activations_by_layer[j])
                chain.append(ChainNeuron(
                    input_weights,
                    None if chain_weight == '-' else float(chain_weight),
                    float(bias),
                    Activation.parse(activation),
                ))
            units.append(ChainUnit(tuple(chain), float(output_weight)))
        reader.expect("end")
    except (ValueError, IndexError) as e:
        raise IngestionError(f"malformed model: {e}", row=reader.position, path=origin) from e
    return MaterializedNetwork(base, units)


# ---- result files ----

FIXED_TABLES = ('splits.csv', 'errors.csv', 'wilcoxon.csv', 'timing.csv')
RUN_TABLE_PATTERNS = ('*__*__*__generations.csv', '*__*__*__final.csv')


class ResultWriter:
    """Appends result rows to the CSV files of one experiment directory.

    Safe to share between threads; the experiment manager funnels every row
    through a single instance.
    """

    def __init__(self, output_dir: Union[str, Path]):
        """Initialize the writer, creating the output directory.

        Args:
            output_dir: Experiment output directory
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def existing_results(self) -> List[Path]:
        """Result tables and model dumps already present in the output directory."""
        found = [self.path(name) for name in FIXED_TABLES if self.path(name).exists()]
        for pattern in RUN_TABLE_PATTERNS:
            found.extend(sorted(self.output_dir.glob(pattern)))
        found.extend(sorted((self.output_dir / 'models').glob('*__run*.txt')))
        return found

    def clear(self) -> int:
        """Remove results of an earlier experiment written to the same directory.

        Only files this writer produces are touched; anything else in the
        directory is left alone.

        Returns:
            Number of files removed
        """
        with self._lock:
            stale = self.existing_results()
            for path in stale:
                path.unlink()
        if stale:
            logger.info(f"Removed {len(stale)} result files of an earlier experiment from {self.output_dir}")
        return len(stale)

    def _append(self, name: str, columns: Sequence[str], rows: Iterable[Dict[str, object]]) -> Path:
        path = self.path(name)
        with self._lock:
            new_file = not path.exists()
            with open(path, 'a', newline='') as f:
                writer = csv.DictWriter(f, fieldnames=list(columns))
                if new_file:
                    writer.writeheader()
                for row in rows:
                    writer.writerow(row)
        return path

    @staticmethod
    def table_name(dataset: str, ablation: str, method: str, kind: str) -> str:
        """File name of a per-method table, e.g. ``airfoil__main__nn__final.csv``."""
        return f"{dataset}__{ablation}__{method}__{kind}.csv"

    def write_generations(self, dataset: str, ablation: str, method: str, records: Sequence[RunRecord]) -> Path:
        """Append one run's generation log.

        Args:
            dataset: Dataset label
            ablation: Ablation name
            method: Method name
            records: One record per generation, generation 0 first

        Returns:
            Path of the table
        """
        name = self.table_name(dataset, ablation, method, 'generations')
        return self._append(name, RESULT_COLUMNS, (r.to_row() for r in records))

    def write_final(self, dataset: str, ablation: str, result: FinalResult) -> Path:
        """Append the final row of one run to the method's final table."""
        name = self.table_name(dataset, ablation, result.method, 'final')
        return self._append(name, FINAL_COLUMNS, [result.to_row()])

    def write_error(self, run_id: int, method: str, error_type: str, message: str) -> Path:
        """Append a failed run to ``errors.csv``.

        Args:
            run_id: Run identifier
            method: Variant that failed
            error_type: Exception class name
            message: Exception message; whitespace is collapsed to one line

        Returns:
            Path of the table
        """
        message = ' '.join(str(message).split())
        return self._append('errors.csv', ERROR_COLUMNS, [{
            'run_id': run_id,
            'method': method,
            'error_type': error_type,
            'message': message,
        }])

    def write_wilcoxon(self, rows: Sequence[Dict[str, object]]) -> Path:
        return self._append('wilcoxon.csv', WILCOXON_COLUMNS, rows)

    def write_timing(self, method: str, summary: TimingSummary) -> Path:
        """Append one row per timing quantity of a method."""
        return self._append('timing.csv', TIMING_COLUMNS, summary.rows(method))

    def write_splits(self, splits: Sequence[Split]) -> Path:
        """Write the train/test indices of every run to ``splits.csv``."""
        rows = []
        for line in format_splits(list(splits)):
            run_id, part, indices = line.split(',', 2)
            rows.append({'run_id': run_id, 'part': part, 'indices': indices})
        return self._append('splits.csv', SPLIT_COLUMNS, rows)

    def write_model(self, method: str, run_id: int, model: Union[CompositeIndividual, MaterializedNetwork]) -> Path:
        """Dump a run's best model to ``models/<method>__run<id>.txt``.

        Args:
            method: Method name
            run_id: Run identifier
            model: Composite individual or its materialized network

        Returns:
            Path of the dump
        """
        models_dir = self.output_dir / 'models'
        models_dir.mkdir(exist_ok=True)
        path = models_dir / f"{method}__run{run_id}.txt"
        path.write_text(dump_model(model))
        return path

    def read_table(self, name: str) -> List[Dict[str, str]]:
        """Rows of a table as dicts of strings; empty when the table does not exist."""
        path = self.path(name)
        if not path.exists():
            return []
        with open(path, 'r', newline='') as f:
            return list(csv.DictReader(f))

    def summary(self) -> Optional[str]:
        files = sorted(p.name for p in self.output_dir.glob('*.csv'))
        return ', '.join(files) if files else None
