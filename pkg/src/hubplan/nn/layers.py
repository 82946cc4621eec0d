"""Dense and gated-recurrent building blocks on top of the tape engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    add,
    backprop,
    matmul,
    mul,
    parameter,
    sigmoid,
    sub,
    tanh,
)

__all__ = ["init_weight", "GruCellParams", "gru_step", "finite_diff_check"]


def init_weight(rng: np.random.Generator, fan_in: int, fan_out: int, name: str) -> Tensor:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weight matrix."""
    bound = 1.0 / np.sqrt(fan_in)
    return parameter(rng.uniform(-bound, bound, size=(fan_in, fan_out)), name)


def init_bias(fan_out: int, name: str) -> Tensor:
    return parameter(np.zeros(fan_out), name)


@dataclass
class GruCellParams:
    """One gated recurrent cell: update/reset gates plus candidate state."""

    input_size: int
    hidden_size: int
    w_update: Tensor
    u_update: Tensor
    b_update: Tensor
    w_reset: Tensor
    u_reset: Tensor
    b_reset: Tensor
    w_cand: Tensor
    u_cand: Tensor
    b_cand: Tensor

    @classmethod
    def create(cls, rng: np.random.Generator, input_size: int, hidden_size: int, prefix: str) -> "GruCellParams":
        def w(tag):
            return init_weight(rng, input_size, hidden_size, f"{prefix}.w_{tag}")

        def u(tag):
            return init_weight(rng, hidden_size, hidden_size, f"{prefix}.u_{tag}")

        def b(tag):
            return init_bias(hidden_size, f"{prefix}.b_{tag}")

        return cls(
            input_size,
            hidden_size,
            w("update"), u("update"), b("update"),
            w("reset"), u("reset"), b("reset"),
            w("cand"), u("cand"), b("cand"),
        )

    def tensors(self) -> dict[str, Tensor]:
        return {
            t.name: t
            for t in (
                self.w_update, self.u_update, self.b_update,
                self.w_reset, self.u_reset, self.b_reset,
                self.w_cand, self.u_cand, self.b_cand,
            )
        }


def gru_step(params: GruCellParams, x_t, h_prev) -> Tensor:
    """One recurrent step: h_t = (1 - u) * h_prev + u * candidate.

    With all-zero parameters the update gate sits at 0.5 and the candidate
    at 0, so h_t = 0.5 * h_prev. Inputs are (batch, input_size) and
    (batch, hidden_size); plain 1-d arrays are promoted to a single row.
    """
    if not isinstance(x_t, Tensor):
        x_t = Tensor(np.atleast_2d(np.asarray(x_t, dtype=np.float64)))
    if not isinstance(h_prev, Tensor):
        h_prev = Tensor(np.atleast_2d(np.asarray(h_prev, dtype=np.float64)))
    if x_t.data.ndim != 2 or h_prev.data.ndim != 2:
        raise ShapeError("gru tensors must be 2-d (batch, width)")
    if x_t.data.shape[1] != params.input_size:
        raise ShapeError(f"gru input width {x_t.data.shape[1]} != {params.input_size}")
    if h_prev.data.shape[1] != params.hidden_size:
        raise ShapeError(f"gru hidden width {h_prev.data.shape[1]} != {params.hidden_size}")

    u = sigmoid(add(add(matmul(x_t, params.w_update), matmul(h_prev, params.u_update)), params.b_update))
    r = sigmoid(add(add(matmul(x_t, params.w_reset), matmul(h_prev, params.u_reset)), params.b_reset))
    c = tanh(add(add(matmul(x_t, params.w_cand), matmul(mul(r, h_prev), params.u_cand)), params.b_cand))
    return add(mul(sub(1.0, u), h_prev), mul(u, c))


def finite_diff_check(f, params: list[Tensor], h: float = 1e-5) -> float:
    """Max relative error between analytic gradients of f() and central differences.

    `f` rebuilds the scalar loss from the current parameter values each call.
    Relative error per coordinate is |analytic - numeric| / max(1, |numeric|).
    """
    if h <= 0.0:
        raise ValueError("step size must be positive")
    with Tape() as tape:
        loss = f()
    if not np.isfinite(loss.data):
        raise NonFiniteError("loss is not finite")
    grads = backprop(tape, loss)

    worst = 0.0
    for p in params:
        analytic = grads.get(p)
        if analytic is None:
            analytic = np.zeros_like(p.data)
        flat = p.data.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = float(f().data)
            flat[i] = orig - h
            lo = float(f().data)
            flat[i] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise NonFiniteError("loss is not finite during finite differencing")
            numeric = (hi - lo) / (2.0 * h)
            err = abs(analytic.ravel()[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
