"""Central finite-difference checks against the reverse pass."""
from collections.abc import Callable, Sequence

import numpy as np

from src.numerics.tensor import Tape, Tensor, backward


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    epsilon: float = 1e-5,
    floor: float = 1e-6,
) -> float:
    """Compare analytic gradients of a scalar function with central differences.

    Args:
        f: Deterministic closure computing a scalar from `params`.
        params: Tensors (requires_grad set) to perturb.
        epsilon: Finite-difference step.
        floor: Lower bound of the relative-error denominator.

    Returns:
        The maximum relative error over every parameter entry.
    """
    with Tape() as tape:
        loss = f()
    grads = backward(tape, loss)
    worst = 0.0
    for param in params:
        param.data = np.ascontiguousarray(param.data)
        analytic = grads[param]
        flat = param.data.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + epsilon
            plus = f().item()
            flat[i] = original - epsilon
            minus = f().item()
            flat[i] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            exact = analytic.reshape(-1)[i]
            error = abs(exact - numeric) / max(abs(exact) + abs(numeric), floor)
            worst = max(worst, float(error))
    return worst


def numeric_gradient(f: Callable[[], Tensor], param: Tensor, epsilon: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of `f` with respect to one tensor."""
    param.data = np.ascontiguousarray(param.data)
    grad = np.zeros_like(param.data)
    flat, out = param.data.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + epsilon
        plus = f().item()
        flat[i] = original - epsilon
        minus = f().item()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * epsilon)
    return grad
