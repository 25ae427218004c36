import dataclasses
import time

import numpy as np
import pytest

from core.exceptions import CacheCoherenceError
from evolution.blocks import PerturbationBlock
from evolution.individual import (
    RESYNC_INTERVAL,
    _resum,
    evaluate_incremental,
    from_base,
    materialize,
    rebuild,
    size,
)
from evolution.perturbation import build_perturbation, deflate, inflate
from network.metrics import rmse
from network.mlp import ArchitectureConfig, random_mlp
from tests.helpers import SMOOTH_POOL, make_regression
from tests.test_network import numeric_gradient


def random_history(ind, train, test, rng, steps, max_blocks=30, pool=None):
    kwargs = {'activation_pool': pool} if pool else {}
    for _ in range(steps):
        if ind.block_count and (ind.block_count >= max_blocks or rng.random() < 0.4):
            ind = deflate(ind, int(rng.integers(ind.block_count)))
        else:
            span = float(rng.choice([0.3, 0.5, 1.0]))
            ind = inflate(ind, build_perturbation(ind, train, test, 2.0, span, rng, **kwargs))
    return ind


class TestFromBase:
    def test_caches_base_semantics(self, regression_split):
        train, test = regression_split
        net = random_mlp(4, np.random.default_rng(0))
        ind = from_base(net, train, test)
        assert ind.blocks == ()
        assert np.array_equal(ind.sum_train_semantics, net.forward(train))
        assert ind.train_rmse == rmse(net.forward(train), train.targets)
        assert ind.test_rmse == rmse(net.forward(test), test.targets)
        assert size(ind) == net.node_count
        assert len(ind.train_activations) == net.depth + 1

    def test_lineage_ids(self, regression_split):
        train, test = regression_split
        net = random_mlp(4, np.random.default_rng(0))
        assert from_base(net, train, test, lineage_id="g0.s1").lineage_id == "g0.s1"
        assert from_base(net, train, test).lineage_id != from_base(net, train, test).lineage_id


class TestIncrementalEvaluation:
    def test_cached_fitness_matches_materialized_forward(self):
        data = make_regression(130, 8, seed=21)
        train, test = data.subset(range(100)), data.subset(range(100, 130))
        rng = np.random.default_rng(22)
        started = time.perf_counter()
        for trial in range(1000):
            net = random_mlp(8, rng)
            ind = random_history(from_base(net, train, test), train, test, rng, steps=int(rng.integers(0, 45)))
            assert ind.block_count <= 30
            model = materialize(ind)
            assert np.max(np.abs(model.forward(train) - ind.sum_train_semantics)) <= 1e-9
            assert np.max(np.abs(model.forward(test) - ind.sum_test_semantics)) <= 1e-9
            assert ind.train_rmse == pytest.approx(rmse(model.forward(train), train.targets), abs=1e-9)
            assert size(ind) == model.node_count
        assert time.perf_counter() - started <= 30.0

    def test_evaluate_incremental(self, regression_split):
        train, test = regression_split
        rng = np.random.default_rng(1)
        ind = random_history(from_base(random_mlp(4, rng), train, test), train, test, rng, steps=6)
        fitness = evaluate_incremental(ind)
        assert fitness.train_rmse == ind.train_rmse
        assert fitness.test_rmse == ind.test_rmse

    def test_deflating_every_block_returns_base_fitness(self, regression_split):
        train, test = regression_split
        rng = np.random.default_rng(7)
        start = from_base(random_mlp(4, rng), train, test)
        ind = start
        for _ in range(10):
            ind = inflate(ind, build_perturbation(ind, train, test, 2.0, 1.0, rng))
        while ind.block_count:
            ind = deflate(ind, int(rng.integers(ind.block_count)))
        assert evaluate_incremental(ind).train_rmse == pytest.approx(start.train_rmse, abs=1e-9)
        assert evaluate_incremental(ind).test_rmse == pytest.approx(start.test_rmse, abs=1e-9)

    def test_inflate_evaluation_is_cheaper_than_full_recompute(self):
        data = make_regression(5000, 8, seed=31)
        train, test = data.subset(range(4000)), data.subset(range(4000, 5000))
        rng = np.random.default_rng(32)
        arch = ArchitectureConfig(depth_range=(3, 3), width_range=(16, 16))
        ind = from_base(random_mlp(8, rng, arch), train, test)
        for _ in range(20):
            ind = inflate(ind, build_perturbation(ind, train, test, 2.0, 1.0, rng))
        unit = build_perturbation(ind, train, test, 2.0, 1.0, rng).unit
        child = inflate(ind, PerturbationBlock.from_unit(unit, ind.train_activations, ind.test_activations))

        def incremental():
            block = PerturbationBlock.from_unit(unit, ind.train_activations, ind.test_activations)
            return evaluate_incremental(inflate(ind, block))

        def full_recompute():
            sums = [
                _resum(base, (b.unit.semantics(activations) for b in child.blocks))
                for base, activations in (
                    (child.base_train_semantics, child.train_activations),
                    (child.base_test_semantics, child.test_activations),
                )
            ]
            return rmse(sums[0], train.targets), rmse(sums[1], test.targets)

        def median_seconds(fn, repeats=50):
            times = []
            for _ in range(repeats):
                started = time.perf_counter()
                fn()
                times.append(time.perf_counter() - started)
            return float(np.median(times))

        assert tuple(incremental()) == pytest.approx(full_recompute(), abs=1e-9)
        assert median_seconds(incremental) <= 0.2 * median_seconds(full_recompute)

    def test_incoherent_cache_detected(self, regression_split):
        train, test = regression_split
        ind = from_base(random_mlp(4, np.random.default_rng(2)), train, test)
        broken = dataclasses.replace(ind, sum_train_semantics=ind.sum_train_semantics[:-1])
        with pytest.raises(CacheCoherenceError):
            evaluate_incremental(broken)

    def test_resync_after_interval(self, regression_split):
        train, test = regression_split
        rng = np.random.default_rng(3)
        ind = from_base(random_mlp(4, rng), train, test)
        ind = random_history(ind, train, test, rng, steps=RESYNC_INTERVAL - 1, max_blocks=10)
        assert ind.updates_since_resync == RESYNC_INTERVAL - 1
        ind = random_history(ind, train, test, rng, steps=1, max_blocks=10)
        assert ind.updates_since_resync == 0
        expected = _resum(ind.base_train_semantics, (b.cached_train_semantics for b in ind.blocks))
        assert np.array_equal(ind.sum_train_semantics, expected)

    def test_node_count_accounts_for_chains(self, regression_split):
        train, test = regression_split
        rng = np.random.default_rng(4)
        ind = random_history(from_base(random_mlp(4, rng), train, test), train, test, rng, steps=8)
        assert ind.node_count == ind.base.node_count + sum(b.depth_span for b in ind.blocks)


class TestMaterializedNetwork:
    @pytest.fixture
    def composite(self, regression_split):
        train, test = regression_split
        rng = np.random.default_rng(6)
        arch = ArchitectureConfig(depth_range=(1, 3), width_range=(2, 4), activation_pool=SMOOTH_POOL)
        ind = from_base(random_mlp(4, rng, arch), train, test)
        for _ in range(3):
            ind = inflate(ind, build_perturbation(ind, train, test, 2.0, 1.0, rng, activation_pool=SMOOTH_POOL))
        return ind

    def test_gradient_matches_finite_differences(self, composite):
        data = make_regression(15, 4, seed=12)
        model = materialize(composite)
        _, analytic = model.loss_and_gradient(data)
        assert np.allclose(analytic, numeric_gradient(model, data), rtol=1e-4, atol=1e-7)

    def test_parameter_round_trip(self, composite, regression_split):
        train, _ = regression_split
        model = materialize(composite)
        clone = model.with_parameters(model.parameter_vector())
        assert np.array_equal(clone.forward(train), model.forward(train))
        assert clone.parameter_count == composite.parameter_count

    def test_rebuild_recomputes_caches(self, composite, regression_split):
        train, test = regression_split
        rebuilt = rebuild(materialize(composite), train, test)
        assert rebuilt.block_count == composite.block_count
        assert np.allclose(rebuilt.sum_train_semantics, composite.sum_train_semantics, atol=1e-12)
        assert rebuilt.node_count == composite.node_count
