"""Pluripotency estimate: accuracy-vs-C curves of random, CG and task-specific banks.

Every trial draws its own task from default_rng([seed, C, trial, 0]); the random
bank, the CG head and the specific bank use streams 1, 2 and 3 of the same key,
so trials can be scheduled in any order and give the same numbers.
"""
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from Models.models import ClassifierHead, ConvFeatureBank, HsiCube, ImageStore, TaskDataset
from Network.layers import feature_length, init_bank, init_head, loss_and_grads
from Network.optimizers import make_optimizer, optimizer_step
from Sampling.contextual_groups import build_task, split_em
from Schemas.schemas import (BankKind, EvaluationConfig, SamplerConfig, TrainerConfig, UtilityCurve,
                             UtilityPoint, UtilityReport)
from src import logger
from src.exceptions import NumericalError, RejectedInputError, TrainingDivergedError
from Training.em_trainer import e_step, measure_transfer_accuracy, minibatches


def frozen_accuracy(bank: ConvFeatureBank, train: TaskDataset, test: TaskDataset,
                    trainer_config: TrainerConfig, rng: np.random.Generator,
                    epochs: Optional[int] = None) -> float:
    head, _ = e_step(bank, train, trainer_config, rng, epochs=epochs)
    return measure_transfer_accuracy(bank, head, test).value


def eval_frozen(bank: ConvFeatureBank, task: TaskDataset, split_fraction: float,
                trainer_config: TrainerConfig, rng: np.random.Generator,
                epochs: Optional[int] = None) -> float:
    """Held-out accuracy of a fresh head trained on frozen features."""
    train, test = split_em(task, split_fraction, rng)
    return frozen_accuracy(bank, train, test, trainer_config, rng, epochs)


def train_specific(train: TaskDataset, bank: ConvFeatureBank, trainer_config: TrainerConfig,
                   epochs: int, rng: np.random.Generator) -> Tuple[ConvFeatureBank, ClassifierHead]:
    """Joint bank + head training on one task (nothing frozen)."""
    head = init_head(train.n_classes, feature_length(bank, train.patch_side), rng)
    head_state = make_optimizer(trainer_config.head_optimizer)
    bank_state = make_optimizer(trainer_config.bank_optimizer)
    targets = train.one_hot()
    params = {"filters": bank.filters, "biases": bank.biases}
    weights = head.weights
    try:
        for _ in range(epochs):
            for batch in minibatches(len(train), trainer_config.batch_size, rng):
                current = ConvFeatureBank(params["filters"], params["biases"], bank.stride)
                loss, grads = loss_and_grads(train.patches[batch], targets[batch], current,
                                             ClassifierHead(weights))
                if not np.isfinite(loss):
                    raise TrainingDivergedError(f"task-specific training diverged: loss is {loss}")
                params, bank_state = optimizer_step(
                    params, {"filters": grads.d_filters, "biases": grads.d_biases}, bank_state)
                head_params, head_state = optimizer_step({"head": weights}, {"head": grads.d_head}, head_state)
                weights = head_params["head"]
        trained = ConvFeatureBank(params["filters"], params["biases"], bank.stride)
    except TrainingDivergedError:
        raise
    except (NumericalError, RejectedInputError) as e:
        raise TrainingDivergedError(f"task-specific training diverged: {e.detail}")
    return trained, ClassifierHead(weights)


def specific_accuracy(train: TaskDataset, test: TaskDataset, geometry: ConvFeatureBank,
                      trainer_config: TrainerConfig, epochs: int, rng: np.random.Generator) -> float:
    bank = init_bank(geometry.d, geometry.w, geometry.b, geometry.stride, rng)
    bank, head = train_specific(train, bank, trainer_config, epochs, rng)
    return measure_transfer_accuracy(bank, head, test).value


def eval_specific(task: TaskDataset, geometry: ConvFeatureBank, split_fraction: float,
                  trainer_config: TrainerConfig, epochs: int, rng: np.random.Generator) -> float:
    """Held-out accuracy of a bank trained from scratch, jointly with its head, on this task.
    `geometry` only supplies d, w, b and the stride; its weights are not used.
    """
    train, test = split_em(task, split_fraction, rng)
    return specific_accuracy(train, test, geometry, trainer_config, epochs, rng)


def _trapezoid(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def transfer_utility(c_grid: Sequence[int], a_random: Sequence[float], a_cg: Sequence[float],
                     a_specific: Sequence[float]) -> float:
    """U: area between the CG and random curves over the area between the specific and random curves."""
    x = np.asarray(c_grid, dtype=np.float64)
    curves = [np.asarray(curve, dtype=np.float64) for curve in (a_random, a_cg, a_specific)]
    if len(x) < 2:
        raise RejectedInputError("transfer utility needs at least two grid points")
    if any(curve.shape != x.shape for curve in curves):
        raise RejectedInputError("every curve must have one accuracy per grid point")
    random_area, cg_area, specific_area = (_trapezoid(x, curve) for curve in curves)
    denominator = specific_area - random_area
    if denominator == 0.0:
        raise NumericalError("transfer utility undefined: specific and random curves enclose no area")
    return (cg_area - random_area) / denominator


def _point(n_classes: int, values: List[float], failed: int) -> UtilityPoint:
    return UtilityPoint(n_classes=n_classes, mean=float(np.mean(values)), std=float(np.std(values)),
                        trials=len(values), failed=failed)


def utility_curves(cg_bank: ConvFeatureBank, source: Union[ImageStore, HsiCube],
                   sampler_config: SamplerConfig, trainer_config: TrainerConfig,
                   evaluation_config: EvaluationConfig, seed: int) -> UtilityReport:
    """Evaluate random, CG and specific banks on identical tasks for every C on the grid."""
    grid = list(evaluation_config.c_grid)
    epochs = evaluation_config.head_epochs
    accuracies: Dict[BankKind, Dict[int, List[float]]] = {kind: {} for kind in BankKind}
    failures: Dict[int, int] = {}
    for n_classes in grid:
        sampler = sampler_config.copy(update={"n_groups": n_classes})
        failures[n_classes] = 0
        for kind in BankKind:
            accuracies[kind][n_classes] = []
        for trial in range(evaluation_config.trials):
            streams = [np.random.default_rng([seed, n_classes, trial, k]) for k in range(4)]
            task = build_task(source, sampler, streams[0])
            train, test = split_em(task, evaluation_config.split_fraction, streams[0])
            random_bank = init_bank(cg_bank.d, cg_bank.w, cg_bank.b, cg_bank.stride, streams[1])
            accuracies[BankKind.RANDOM][n_classes].append(
                frozen_accuracy(random_bank, train, test, trainer_config, streams[1], epochs))
            accuracies[BankKind.CG][n_classes].append(
                frozen_accuracy(cg_bank, train, test, trainer_config, streams[2], epochs))
            try:
                accuracies[BankKind.SPECIFIC][n_classes].append(specific_accuracy(
                    train, test, cg_bank, trainer_config, evaluation_config.specific_epochs, streams[3]))
            except TrainingDivergedError as e:
                failures[n_classes] += 1
                logger.warning(f"task-specific trial C={n_classes} #{trial} failed: {e.detail}")
        logger.info("C=%d: random %.4f, CG %.4f, specific %s", n_classes,
                    np.mean(accuracies[BankKind.RANDOM][n_classes]),
                    np.mean(accuracies[BankKind.CG][n_classes]),
                    f"{np.mean(accuracies[BankKind.SPECIFIC][n_classes]):.4f}"
                    if accuracies[BankKind.SPECIFIC][n_classes] else "n/a")

    missing = [c for c in grid if not accuracies[BankKind.SPECIFIC][c]]
    if missing:
        raise TrainingDivergedError(f"specific curve missing grid points C={missing}: every trial diverged")

    curves = {}
    for kind in BankKind:
        points = [_point(c, accuracies[kind][c], failures[c] if kind == BankKind.SPECIFIC else 0)
                  for c in grid]
        curves[kind] = UtilityCurve(bank_kind=kind, points=points)
    utility: Optional[float] = None
    try:
        utility = transfer_utility(grid, curves[BankKind.RANDOM].means(), curves[BankKind.CG].means(),
                                   curves[BankKind.SPECIFIC].means())
        logger.info(f"Transfer utility U={utility:.4f} over C grid {grid}")
    except NumericalError as e:
        logger.warning(f"{e.detail}; reporting the curves without U")
    return UtilityReport(c_grid=grid, random=curves[BankKind.RANDOM], cg=curves[BankKind.CG],
                         specific=curves[BankKind.SPECIFIC], utility=utility)
