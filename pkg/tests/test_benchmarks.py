"""Behaviour on the airfoil benchmark.

Skipped unless the airfoil file is present under DATA_DIR (see DATASETS.md).
The full-scale checks carry the ``slow`` marker; ``pytest -m "not slow"``
leaves them out.
"""

import time

import numpy as np
import pytest

from config.settings import Settings
from evolution.config import AprtMode, EvolutionConfig
from evolution.engine import run_evolution
from evolution.trainer import baseline_nn, derive_baseline_architecture
from harness.ingest import load_dataset, monte_carlo_splits, verify_shape
from network.mlp import OptimizerConfig
from utils.helpers import median_improvement

AIRFOIL_PATH = Settings.dataset_path('airfoil')

pytestmark = pytest.mark.skipif(
    AIRFOIL_PATH is None or not AIRFOIL_PATH.is_file(), reason="airfoil dataset not available",
)


@pytest.fixture(scope='module')
def airfoil():
    data = load_dataset(AIRFOIL_PATH, name='airfoil')
    verify_shape(data, Settings.load_dataset_entry('airfoil'))
    return data


@pytest.fixture(scope='module')
def airfoil_splits(airfoil):
    return [split.apply(airfoil) for split in monte_carlo_splits(airfoil, runs=30, master_seed=0)]


def airfoil_config(**overrides):
    return EvolutionConfig(population_size=100, generations=200, p_inflate=0.7, aprt_mode=AprtMode.HALF).with_overrides(
        **overrides
    )


def test_table_shape(airfoil):
    assert (airfoil.row_count, airfoil.feature_count) == (1502, 5)


@pytest.mark.slow
def test_elitist_monotonicity(airfoil_splits):
    for seed, (train, test) in enumerate(airfoil_splits[:10]):
        result = run_evolution(airfoil_config(seed=seed), train, test)
        best = [record.best_train_rmse for record in result.log]
        assert all(later <= earlier for earlier, later in zip(best, best[1:]))


@pytest.mark.slow
def test_learning_signal(airfoil_splits):
    initial, final = [], []
    for seed, (train, test) in enumerate(airfoil_splits):
        result = run_evolution(airfoil_config(seed=seed), train, test)
        initial.append(result.initial_best_train_rmse)
        final.append(result.best.train_rmse)
    assert median_improvement(initial, final) >= 0.20


def test_wall_clock(airfoil_splits):
    train, test = airfoil_splits[0]
    started = time.perf_counter()
    run_evolution(airfoil_config(generations=100, aprt_mode=AprtMode.NONE), train, test)
    assert time.perf_counter() - started <= 120.0


def test_incremental_evaluation_beats_backprop_epoch(airfoil_splits):
    train, test = airfoil_splits[0]
    result = run_evolution(airfoil_config(generations=50, p_inflate=1.0, aprt_mode=AprtMode.NONE), train, test)
    inflate_times = [r.inflate_eval_time_s for r in result.log[1:] if r.inflate_count + r.fallback_count > 0]

    architecture = derive_baseline_architecture(result.best)
    baseline = baseline_nn(
        architecture, train, test, OptimizerConfig(learning_rate=0.001, epochs=20), np.random.default_rng(0),
    )
    assert np.mean(inflate_times) <= 0.5 * baseline.record.seconds_per_epoch


@pytest.mark.slow
def test_lower_inflate_probability_gives_smaller_models(airfoil_splits):
    mean_sizes = []
    for p_inflate in (0.3, 0.5, 0.7, 1.0):
        sizes = [
            run_evolution(airfoil_config(p_inflate=p_inflate, seed=seed), train, test).best.node_count
            for seed, (train, test) in enumerate(airfoil_splits[:10])
        ]
        mean_sizes.append(np.mean(sizes))
    assert all(later >= earlier for earlier, later in zip(mean_sizes, mean_sizes[1:]))
