"""Gradient training around evolution: AprT, ApoT and the backprop baseline.

AprT trains (some of) the initial networks before evolution starts, ApoT
fine-tunes the final best individual, and the baseline trains a fresh network
sized like an evolved one.
"""

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import ConfigurationError, DivergenceError
from core.logging import get_logger
from evolution.config import AprtMode
from evolution.individual import CompositeIndividual, materialize, rebuild
from network.activations import Activation
from network.dataset import Dataset
from network.metrics import rmse
from network.mlp import MlpNetwork, OptimizerConfig, build_mlp, train_backprop

logger = get_logger('Trainer')


class TrainingPhase(str, Enum):
    APRT = "aprt"
    APOT = "apot"
    BASELINE = "baseline"


@dataclass(frozen=True)
class TrainingRecord:
    phase: TrainingPhase
    epochs_run: int
    loss_curve: Tuple[float, ...]
    wall_time: float
    member_index: Optional[int] = None
    diverged: bool = False
    message: str = ""

    def __post_init__(self):
        object.__setattr__(self, "loss_curve", tuple(float(v) for v in self.loss_curve))
        if len(self.loss_curve) != self.epochs_run:
            raise ValueError(f"loss curve has {len(self.loss_curve)} entries for {self.epochs_run} epochs")
        if self.wall_time < 0:
            raise ValueError("wall_time must be >= 0")

    @property
    def seconds_per_epoch(self) -> Optional[float]:
        if self.epochs_run == 0:
            return None
        return self.wall_time / self.epochs_run


class ApotScores(NamedTuple):
    train_rmse_before: float
    train_rmse_after: float
    test_rmse_before: float
    test_rmse_after: float


@dataclass(frozen=True, eq=False)
class BaselineArchitecture:
    input_dim: int
    hidden_widths: Tuple[int, ...]
    activation: Activation = Activation.TANH

    @property
    def node_count(self) -> int:
        return sum(self.hidden_widths) + 1


@dataclass(frozen=True, eq=False)
class BaselineResult:
    network: MlpNetwork
    train_rmse: float
    test_rmse: float
    record: TrainingRecord
    architecture: BaselineArchitecture = field(repr=False)


def _train(model, data: Dataset, opt_cfg: OptimizerConfig):
    started = time.perf_counter()
    trained, losses = train_backprop(model, data, opt_cfg)
    return trained, losses, time.perf_counter() - started


def apriori_train(
    members: Sequence[MlpNetwork],
    mode: AprtMode,
    opt_cfg: OptimizerConfig,
    rng: np.random.Generator,
    data: Optional[Dataset] = None,
) -> Tuple[List[MlpNetwork], List[TrainingRecord]]:
    """Backprop-train none, a random half (floor), or all of the members.

    Args:
        members: initial base networks
        mode: AprtMode (or its value)
        opt_cfg: learning rate and epochs
        rng: stream used to pick the half
        data: training split (required unless mode is none)

    Returns:
        (networks with trained copies in place, one record per trained member)
    """
    mode = AprtMode(mode)
    networks = list(members)
    if mode is AprtMode.NONE or not networks:
        return networks, []
    if data is None:
        raise ConfigurationError("AprT needs the training split")

    if mode is AprtMode.HALF:
        chosen = np.sort(rng.choice(len(networks), size=len(networks) // 2, replace=False))
    else:
        chosen = np.arange(len(networks))

    records = []
    for index in chosen:
        index = int(index)
        trained, losses, elapsed = _train(networks[index], data, opt_cfg)
        networks[index] = trained
        records.append(TrainingRecord(TrainingPhase.APRT, len(losses), losses, elapsed, member_index=index))
    logger.info(f"AprT ({mode.value}) trained {len(records)}/{len(networks)} networks")
    return networks, records


def aposteriori_train(
    best: CompositeIndividual,
    train: Dataset,
    test: Dataset,
    opt_cfg: OptimizerConfig,
) -> Tuple[CompositeIndividual, TrainingRecord, ApotScores]:
    """Fine-tune every weight of the materialized best individual.

    The input individual is never modified. Both test RMSEs are reported and
    neither model is preferred automatically; on divergence the original is
    returned with a record flagged ``diverged``.
    """
    model = materialize(best)
    started = time.perf_counter()
    try:
        tuned, losses = train_backprop(model, train, opt_cfg)
    except DivergenceError as e:
        elapsed = time.perf_counter() - started
        logger.warning(f"ApoT diverged at epoch {e.epoch}; keeping the evolved model")
        record = TrainingRecord(
            TrainingPhase.APOT, len(e.loss_curve), e.loss_curve, elapsed,
            diverged=True, message=str(e),
        )
        scores = ApotScores(best.train_rmse, best.train_rmse, best.test_rmse, best.test_rmse)
        return best, record, scores
    elapsed = time.perf_counter() - started

    if not losses:
        tuned_individual = best
    else:
        tuned_individual = rebuild(tuned, train, test, lineage_id=f"{best.lineage_id}-apot")
    record = TrainingRecord(TrainingPhase.APOT, len(losses), losses, elapsed)
    scores = ApotScores(
        best.train_rmse, tuned_individual.train_rmse, best.test_rmse, tuned_individual.test_rmse,
    )
    logger.info(
        f"ApoT: test RMSE {scores.test_rmse_before:.6g} -> {scores.test_rmse_after:.6g} "
        f"({len(losses)} epochs)"
    )
    return tuned_individual, record, scores


def derive_baseline_architecture(
    ind: CompositeIndividual,
    activation: Activation = Activation.TANH,
) -> BaselineArchitecture:
    """One hidden layer per base hidden layer, widths scaled to the evolved node count.

    Hidden widths keep the base network's proportions; the rounding remainder
    goes to the last hidden layer so hidden + output neurons == node_count.
    """
    base_widths = ind.base.hidden_widths
    hidden_total = ind.node_count - 1
    if not base_widths:
        # a base without hidden layers still gets one layer holding the evolved neurons
        widths = (hidden_total,) if hidden_total > 0 else ()
        return BaselineArchitecture(ind.base.input_dim, widths, activation)
    ratio = hidden_total / sum(base_widths)
    widths = [max(1, int(np.floor(w * ratio))) for w in base_widths]
    widths[-1] += hidden_total - sum(widths)
    return BaselineArchitecture(ind.base.input_dim, tuple(widths), activation)


def baseline_nn(
    arch_spec: BaselineArchitecture,
    train: Dataset,
    test: Dataset,
    opt_cfg: OptimizerConfig,
    rng: np.random.Generator,
) -> BaselineResult:
    """Train a freshly initialized network of the given architecture."""
    network = build_mlp(arch_spec.input_dim, arch_spec.hidden_widths, rng, activation_pool=(arch_spec.activation,))
    trained, losses, elapsed = _train(network, train, opt_cfg)
    record = TrainingRecord(TrainingPhase.BASELINE, len(losses), losses, elapsed)
    return BaselineResult(
        network=trained,
        train_rmse=rmse(trained.forward(train), train.targets),
        test_rmse=rmse(trained.forward(test), test.targets),
        record=record,
        architecture=arch_spec,
    )
