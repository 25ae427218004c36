import time

import numpy as np
import pytest

from core.exceptions import (
    BlockIndexError,
    CacheCoherenceError,
    ConfigurationError,
    DeflateUnavailableError,
    ShapeError,
)
from evolution.individual import from_base
from evolution.perturbation import build_perturbation, chain_length, deflate, inflate
from network.activations import Activation
from network.mlp import build_mlp
from tests.helpers import make_regression


@pytest.fixture
def parent(regression_split):
    train, test = regression_split
    net = build_mlp(train.feature_count, (6, 3, 4), np.random.default_rng(11))
    return from_base(net, train, test)


class TestChainLength:
    def test_full_span_covers_every_layer(self):
        assert chain_length(4, 1.0) == 4

    def test_fraction_rounds_up(self):
        assert chain_length(10, 0.7) == 7
        assert chain_length(4, 0.3) == 2

    def test_never_empty(self):
        assert chain_length(4, 0.01) == 1


class TestBuildPerturbation:
    def test_chain_structure(self, parent, regression_split):
        train, test = regression_split
        block = build_perturbation(parent, train, test, 2.0, 1.0, np.random.default_rng(0))
        assert block.depth_span == parent.base.depth + 1
        assert block.chain[0].chain_weight is None
        assert all(neuron.chain_weight is not None for neuron in block.chain[1:])
        assert block.chain[-1].activation is Activation.TANH
        widths = [a.shape[1] for a in parent.train_activations]
        assert [n.input_weights.size for n in block.chain] == widths

    def test_span_fraction_shortens_chain(self, parent, regression_split):
        train, test = regression_split
        block = build_perturbation(parent, train, test, 2.0, 0.5, np.random.default_rng(0))
        assert block.depth_span == 2

    def test_cached_semantics_match_chain(self, parent, regression_split):
        train, test = regression_split
        block = build_perturbation(parent, train, test, 2.0, 1.0, np.random.default_rng(3))
        assert np.array_equal(block.cached_train_semantics, block.unit.semantics(parent.train_activations))
        assert block.cached_test_semantics.shape == (test.row_count,)

    def test_mutation_ball(self, parent, regression_split):
        train, test = regression_split
        rng = np.random.default_rng(5)
        output_weights = np.empty(100_000)
        internal_weight_count = 0
        for i in range(output_weights.size):
            block = build_perturbation(parent, train, test, 2.0, float(rng.choice([0.3, 0.5, 1.0])), rng)
            output_weights[i] = block.output_weight
            internal = block.unit.parameter_vector()[:-1]
            internal_weight_count += internal.size
            assert np.all(np.abs(internal) <= 1.0)
            assert np.all(np.abs(block.cached_train_semantics) <= 2.0)
            assert np.all(np.abs(block.cached_test_semantics) <= 2.0)
        assert internal_weight_count >= 1_000_000
        assert np.all((output_weights >= 0.0) & (output_weights <= 2.0))
        assert 0.98 <= output_weights.mean() <= 1.02

    def test_sampled_weights_in_range(self, parent, regression_split):
        train, test = regression_split
        block = build_perturbation(parent, train, test, 2.0, 1.0, np.random.default_rng(8))
        params = block.unit.parameter_vector()[:-1]
        assert np.all(np.abs(params) <= 1.0)

    @pytest.mark.parametrize("ms", [0.0, -1.0, float('inf')])
    def test_rejects_bad_mutation_step(self, parent, regression_split, ms):
        train, test = regression_split
        with pytest.raises(ConfigurationError):
            build_perturbation(parent, train, test, ms, 1.0, np.random.default_rng(0))

    @pytest.mark.parametrize("span", [0.0, 1.5])
    def test_rejects_bad_span_fraction(self, parent, regression_split, span):
        train, test = regression_split
        with pytest.raises(ConfigurationError):
            build_perturbation(parent, train, test, 2.0, span, np.random.default_rng(0))

    def test_rejects_feature_mismatch(self, parent):
        other = make_regression(80, 2)
        with pytest.raises(ShapeError):
            build_perturbation(parent, other, other, 2.0, 1.0, np.random.default_rng(0))


class TestInflateDeflate:
    def test_inflate_appends_block(self, parent, regression_split):
        train, test = regression_split
        block = build_perturbation(parent, train, test, 2.0, 1.0, np.random.default_rng(1))
        child = inflate(parent, block)
        assert child.blocks == (block,)
        assert parent.blocks == ()
        assert np.allclose(child.sum_train_semantics, parent.sum_train_semantics + block.cached_train_semantics)
        assert child.node_count == parent.node_count + block.depth_span

    def test_inflate_then_deflate_restores_parent(self, parent, regression_split):
        train, test = regression_split
        rng = np.random.default_rng(2)
        current = parent
        started = time.perf_counter()
        for _ in range(10_000):
            block = build_perturbation(current, train, test, 2.0, 1.0, rng)
            restored = deflate(inflate(current, block), len(current.blocks))
            assert len(restored.blocks) == len(current.blocks)
            assert all(a is b for a, b in zip(restored.blocks, current.blocks))
            assert np.max(np.abs(restored.sum_train_semantics - current.sum_train_semantics)) <= 1e-12
            assert np.max(np.abs(restored.sum_test_semantics - current.sum_test_semantics)) <= 1e-12
            if len(current.blocks) < 5:
                current = inflate(current, block)
        assert time.perf_counter() - started <= 10.0

    def test_deflate_removes_chosen_block(self, parent, regression_split):
        train, test = regression_split
        rng = np.random.default_rng(4)
        current = parent
        for _ in range(3):
            current = inflate(current, build_perturbation(current, train, test, 2.0, 1.0, rng))
        child = deflate(current, 1)
        assert child.blocks == (current.blocks[0], current.blocks[2])

    def test_deflate_without_blocks(self, parent):
        with pytest.raises(DeflateUnavailableError):
            deflate(parent, 0)

    def test_deflate_index_out_of_range(self, parent, regression_split):
        train, test = regression_split
        child = inflate(parent, build_perturbation(parent, train, test, 2.0, 1.0, np.random.default_rng(0)))
        with pytest.raises(BlockIndexError):
            deflate(child, 1)
        with pytest.raises(IndexError):
            deflate(child, -1)

    def test_inflate_rejects_block_of_other_length(self, parent):
        other_train = make_regression(30, 4, seed=9)
        other_test = make_regression(20, 4, seed=10)
        other = from_base(parent.base, other_train, other_test)
        block = build_perturbation(other, other_train, other_test, 2.0, 1.0, np.random.default_rng(0))
        with pytest.raises(CacheCoherenceError):
            inflate(parent, block)
