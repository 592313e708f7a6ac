from dataclasses import replace
from typing import Dict, Tuple

import numpy as np

from Models.models import OptimizerKind, OptimizerState
from Schemas.schemas import OptimizerConfig
from src.exceptions import NumericalError, RejectedInputError


def make_optimizer(config: OptimizerConfig) -> OptimizerState:
    return OptimizerState(
        kind=OptimizerKind(config.kind),
        lr=config.lr,
        momentum=config.momentum,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
    )


def optimizer_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
                   state: OptimizerState) -> Tuple[Dict[str, np.ndarray], OptimizerState]:
    """One SGD (optionally with momentum) or bias-corrected Adam update.
    Inputs are left untouched; new parameter arrays and a new state are returned.
    """
    for name, param in params.items():
        if name not in grads or grads[name].shape != param.shape:
            raise RejectedInputError(f"gradient for '{name}' is missing or has the wrong shape")
        if not np.isfinite(grads[name]).all():
            raise NumericalError(f"non-finite gradient for '{name}', step rejected")

    step = state.step + 1
    first = dict(state.first_moment)
    second = dict(state.second_moment)
    updated = {}
    for name, param in params.items():
        grad = grads[name]
        if state.kind == OptimizerKind.SGD:
            if state.momentum > 0.0:
                velocity = state.momentum * first.get(name, np.zeros_like(param)) + grad
                first[name] = velocity
                updated[name] = param - state.lr * velocity
            else:
                updated[name] = param - state.lr * grad
        else:
            m = state.beta1 * first.get(name, np.zeros_like(param)) + (1.0 - state.beta1) * grad
            v = state.beta2 * second.get(name, np.zeros_like(param)) + (1.0 - state.beta2) * grad * grad
            first[name], second[name] = m, v
            m_hat = m / (1.0 - state.beta1 ** step)
            v_hat = v / (1.0 - state.beta2 ** step)
            updated[name] = param - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return updated, replace(state, step=step, first_moment=first, second_moment=second)
