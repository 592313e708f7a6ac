"""EM training loop of the contextually guided CNN.

Every iteration draws a fresh contextual-group task, fits a new softmax head on
the E subset with the bank frozen, scores it on the M subset, then updates the
bank on the M subset with the head frozen.
"""
import os
import time
from typing import Callable, Iterator, Optional, Tuple, Union

import numpy as np
import pandas as pd

from Models.models import (ClassifierHead, ConvFeatureBank, HsiCube, ImageStore, OptimizerState,
                           TaskDataset, TrainingTrace, TransferableAccuracy)
from Network.bank_io import write_bank
from Network.layers import (batch_loss, extract_features, head_loss_and_grads, init_bank, init_head,
                            loss_and_grads, predict)
from Network.optimizers import make_optimizer, optimizer_step
from Sampling.contextual_groups import build_task, split_em
from Schemas.schemas import BankConfig, SamplerConfig, TraceRecord, TrainerConfig
from src import logger
from src.exceptions import (NumericalError, RejectedInputError, TrainingDivergedError,
                            TrainingFailedError)


def minibatches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _check_loss(loss: float, stage: str) -> None:
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"{stage} diverged: loss is {loss}")


def train_head(features: np.ndarray, targets: np.ndarray, head: ClassifierHead, config: TrainerConfig,
               epochs: int, rng: np.random.Generator) -> Tuple[ClassifierHead, float]:
    """Minibatch optimization of a softmax head on fixed features."""
    state = make_optimizer(config.head_optimizer)
    weights = head.weights
    try:
        for _ in range(epochs):
            for batch in minibatches(len(features), config.batch_size, rng):
                loss, d_head, _ = head_loss_and_grads(features[batch], targets[batch], ClassifierHead(weights))
                _check_loss(loss, "head training")
                params, state = optimizer_step({"head": weights}, {"head": d_head}, state)
                weights = params["head"]
        trained = ClassifierHead(weights)
        final_loss, _, _ = head_loss_and_grads(features, targets, trained)
    except TrainingDivergedError:
        raise
    except NumericalError as e:
        raise TrainingDivergedError(f"head training diverged: {e.detail}")
    _check_loss(final_loss, "head training")
    return trained, final_loss


def e_step(bank: ConvFeatureBank, x_e: TaskDataset, config: TrainerConfig,
           rng: np.random.Generator, epochs: Optional[int] = None) -> Tuple[ClassifierHead, float]:
    """Fit a freshly initialized head on X_E while the bank stays frozen.
    Features are computed once since the bank does not move during this step.
    """
    features = extract_features(x_e.patches, bank)
    head = init_head(x_e.n_classes, features.shape[1], rng)
    return train_head(features, x_e.one_hot(), head, config, epochs or config.epochs_e, rng)


def measure_transfer_accuracy(bank: ConvFeatureBank, head: ClassifierHead,
                              x_m: TaskDataset) -> TransferableAccuracy:
    if len(x_m) == 0:
        raise RejectedInputError("transferable accuracy needs a nonempty M subset")
    predictions = predict(extract_features(x_m.patches, bank), head)
    n_correct = int(np.sum(predictions == x_m.labels))
    return TransferableAccuracy(value=n_correct / len(x_m), n_classes=x_m.n_classes,
                                n_samples=len(x_m), n_correct=n_correct)


def m_step(bank: ConvFeatureBank, head: ClassifierHead, x_m: TaskDataset, config: TrainerConfig,
           rng: np.random.Generator,
           state: Optional[OptimizerState] = None) -> Tuple[ConvFeatureBank, float, OptimizerState]:
    """Continue training the bank on X_M with the head frozen.
    Returns a new bank; the input bank and head are never written.
    """
    state = state if state is not None else make_optimizer(config.bank_optimizer)
    targets = x_m.one_hot()
    params = {"filters": bank.filters, "biases": bank.biases}
    try:
        for _ in range(config.epochs_m):
            for batch in minibatches(len(x_m), config.batch_size, rng):
                current = ConvFeatureBank(params["filters"], params["biases"], bank.stride)
                loss, grads = loss_and_grads(x_m.patches[batch], targets[batch], current, head,
                                             freeze_head=True)
                _check_loss(loss, "M-step")
                params, state = optimizer_step(
                    params, {"filters": grads.d_filters, "biases": grads.d_biases}, state)
        updated = ConvFeatureBank(params["filters"], params["biases"], bank.stride)
        final_loss = batch_loss(x_m.patches, targets, updated, head)
    except TrainingDivergedError:
        raise
    except (NumericalError, RejectedInputError) as e:
        raise TrainingDivergedError(f"M-step diverged: {e.detail}")
    _check_loss(final_loss, "M-step")
    return updated, final_loss, state


def has_converged(trace: Union[TrainingTrace, list], window: int, threshold: float) -> bool:
    """True once the last `window` accuracies span less than `threshold`."""
    if window < 2:
        raise RejectedInputError(f"convergence window must be >= 2, got {window}")
    values = trace.accuracies() if isinstance(trace, TrainingTrace) else list(trace)
    if len(values) < window:
        return False
    recent = values[-window:]
    return max(recent) - min(recent) < threshold


def train_cgcnn(source: Union[ImageStore, HsiCube], sampler_config: SamplerConfig,
                trainer_config: TrainerConfig, bank_config: BankConfig = None,
                initial_bank: Optional[ConvFeatureBank] = None, checkpoint_dir: Optional[str] = None,
                on_iteration: Optional[Callable[[TraceRecord], None]] = None
                ) -> Tuple[ConvFeatureBank, TrainingTrace]:
    """Run EM iterations until the transferable accuracy converges or max_iterations is hit.

    Iteration k draws all of its randomness from default_rng([seed, k]); the initial
    bank uses default_rng([seed, 0]). Bank weights and bank optimizer moments carry
    over between iterations, the head is rebuilt every time.
    """
    bank_config = bank_config or BankConfig()
    seed = trainer_config.seed
    if initial_bank is not None:
        bank = initial_bank.copy()
    else:
        bank = init_bank(bank_config.d, bank_config.w, sampler_config.channels, bank_config.s,
                         np.random.default_rng([seed, 0]))
    if bank.b != sampler_config.channels:
        raise RejectedInputError(
            f"bank has {bank.b} channels but the sampler produces {sampler_config.channels}")
    if bank.window != sampler_config.patch_size:
        logger.warning(f"patch size {sampler_config.patch_size} differs from the bank's pooled "
                       f"window {bank.window}; pooled maps are flattened")

    bank_state = make_optimizer(trainer_config.bank_optimizer)
    trace = TrainingTrace()
    aborted = 0
    for iteration in range(1, trainer_config.max_iterations + 1):
        started = time.perf_counter()
        rng = np.random.default_rng([seed, iteration])
        task = build_task(source, sampler_config, rng)
        x_e, x_m = split_em(task, trainer_config.e_fraction, rng)
        try:
            head, loss_e = e_step(bank, x_e, trainer_config, rng)
            accuracy = measure_transfer_accuracy(bank, head, x_m)
            new_bank, loss_m, new_state = m_step(bank, head, x_m, trainer_config, rng, bank_state)
        except NumericalError as e:
            aborted += 1
            logger.warning(f"EM iteration {iteration} aborted ({aborted} in a row): {e.detail}")
            if aborted > trainer_config.max_consecutive_aborts:
                raise TrainingFailedError(
                    f"training failed: {aborted} consecutive EM iterations diverged, last: {e.detail}")
            continue
        aborted = 0
        bank, bank_state = new_bank, new_state
        elapsed = time.perf_counter() - started
        record = TraceRecord(iteration=iteration, accuracy=accuracy.value,
                             loss_e=loss_e, loss_m=loss_m,
                             seconds=elapsed if trainer_config.record_wall_time else 0.0)
        trace.append(record)
        logger.info(f"EM iteration {iteration}: A={accuracy.value:.4f} "
                    f"({accuracy.n_correct}/{accuracy.n_samples}) loss_E={loss_e:.4f} "
                    f"loss_M={loss_m:.4f} in {elapsed:.2f}s")
        if on_iteration is not None:
            on_iteration(record)
        if checkpoint_dir and trainer_config.checkpoint_every and iteration % trainer_config.checkpoint_every == 0:
            write_bank(bank, os.path.join(checkpoint_dir, f"bank_iter{iteration:04d}.cgcn"))
        if has_converged(trace, trainer_config.convergence_window, trainer_config.convergence_threshold):
            logger.info(f"Transferable accuracy converged after {iteration} iterations")
            break

    if not len(trace):
        raise TrainingFailedError("training failed: no EM iteration completed")
    return bank, trace


def write_trace_csv(trace: TrainingTrace, path: str) -> str:
    """trace.csv: iteration, A, loss_E, loss_M, seconds (all zero unless wall time is recorded)."""
    frame = pd.DataFrame({
        "iteration": [record.iteration for record in trace],
        "A": [record.accuracy for record in trace],
        "loss_E": [record.loss_e for record in trace],
        "loss_M": [record.loss_m for record in trace],
        "seconds": [record.seconds for record in trace],
    })
    frame.to_csv(path, index=False)
    return path
