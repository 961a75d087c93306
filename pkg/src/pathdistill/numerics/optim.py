"""Adam with decoupled weight decay, and the cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ParameterStore


@dataclass
class OptimizerState:
    lr_max: float = 2e-4
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(store: ParameterStore, opt: OptimizerState, lr: float) -> None:
    """One bias-corrected Adam update from the grads currently in ``store``.

    Weight decay is decoupled: it shrinks parameters directly instead of
    entering the moment estimates.
    """
    opt.step += 1
    t = opt.step
    bc1 = 1.0 - opt.beta1 ** t
    bc2 = 1.0 - opt.beta2 ** t
    for name, p in store.items():
        if not store.is_trainable(name):
            continue
        g = p.grad
        if name not in opt.m:
            opt.m[name] = np.zeros_like(p.data)
            opt.v[name] = np.zeros_like(p.data)
        m, v = opt.m[name], opt.v[name]
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + opt.eps)
        p.data -= lr * update
        if opt.weight_decay:
            p.data -= lr * opt.weight_decay * p.data


def cosine_lr(step: int, total_steps: int, lr_max: float) -> float:
    """Half-cosine decay from ``lr_max`` at step 0 to 0 at ``total_steps``."""
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    if not (0 <= step <= total_steps):
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return lr_max * (1.0 + math.cos(math.pi * step / total_steps)) / 2.0
