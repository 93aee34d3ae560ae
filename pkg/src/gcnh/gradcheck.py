"""Finite-difference verification of analytic gradients."""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor

__all__ = ["finite_diff_check"]


def finite_diff_check(
    loss_fn: Callable[[Tape | None], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-5,
    max_coords_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(tape)`` must rebuild the same scalar loss on every call
    (deterministic: dropout disabled or fixed masks). It is called once with
    a fresh tape to obtain analytic gradients, then twice per probed
    coordinate with ``tape=None``. The error at a coordinate is
    ``|analytic - numeric| / max(1e-8, |analytic| + |numeric|)``.

    ``max_coords_per_param`` caps how many coordinates of each parameter are
    probed (sampled without replacement using ``rng``); by default every
    coordinate is checked.
    """
    tape = Tape()
    loss = loss_fn(tape)
    base = loss.item()
    if not math.isfinite(base):
        raise ValueError(f"loss is not finite: {base}")
    tape.backward(loss)
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.values.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords_per_param is not None and flat.size > max_coords_per_param:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(flat.size, size=max_coords_per_param, replace=False)
        for idx in coords:
            original = flat[idx]
            flat[idx] = original + step
            plus = loss_fn(None).item()
            flat[idx] = original - step
            minus = loss_fn(None).item()
            flat[idx] = original
            if not (math.isfinite(plus) and math.isfinite(minus)):
                raise ValueError("loss is not finite at a perturbed point")
            numeric = (plus - minus) / (2.0 * step)
            ana = a.reshape(-1)[idx]
            err = abs(ana - numeric) / max(1e-8, abs(ana) + abs(numeric))
            worst = max(worst, err)
    return worst
