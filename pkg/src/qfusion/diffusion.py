"""Categorical forward-noising and reverse-posterior machinery.

The forward process replaces a category with a uniform draw: at step t the
marginal is ``keep(t) * delta(x0) + (1 - keep(t)) / K``. The reverse step
samples ``q(x_{t-1} | x_t, x0)`` marginalized over a predicted clean-category
distribution. The same kernel serves gate types, wire assignments and edge
bits (K = 2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff
from .autodiff import Tensor

DEFAULT_STEPS = 32
TERMINAL_KEEP_MAX = 0.02


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step keep probabilities, index 0..T with keep[0] = 1."""

    keep_probabilities: np.ndarray

    def __post_init__(self):
        keep = np.asarray(self.keep_probabilities, dtype=np.float64)
        object.__setattr__(self, "keep_probabilities", keep)
        if keep.ndim != 1 or keep.size < 2:
            raise ScheduleError("schedule needs keep probabilities for steps 0..T, T >= 1")
        if keep[0] != 1.0:
            raise ScheduleError("keep probability at step 0 must be exactly 1")
        if np.any(keep <= 0.0) or np.any(keep > 1.0):
            raise ScheduleError("keep probabilities must lie in (0, 1]")
        if np.any(np.diff(keep) >= 0.0):
            raise ScheduleError("keep probabilities must be strictly decreasing")
        if keep[-1] > TERMINAL_KEEP_MAX:
            raise ScheduleError(
                f"terminal keep probability {keep[-1]:.4f} exceeds {TERMINAL_KEEP_MAX}"
            )

    @property
    def total_steps(self) -> int:
        return self.keep_probabilities.size - 1

    def keep(self, t: int) -> float:
        self._check_step(t)
        return float(self.keep_probabilities[t])

    def step_keep(self, t: int) -> float:
        """Single-step keep probability keep(t) / keep(t-1)."""
        self._check_step(t)
        return float(self.keep_probabilities[t] / self.keep_probabilities[t - 1])

    def _check_step(self, t: int) -> None:
        if not 1 <= t <= self.total_steps:
            raise ScheduleError(f"step {t} outside 1..{self.total_steps}")


def cosine_schedule(total_steps: int = DEFAULT_STEPS, offset: float = 0.008) -> NoiseSchedule:
    steps = np.arange(total_steps + 1, dtype=np.float64) / total_steps
    f = np.cos((steps + offset) / (1.0 + offset) * math.pi / 2.0) ** 2
    keep = f / f[0]
    keep[0] = 1.0
    keep[-1] = max(keep[-1], 1e-12)
    return NoiseSchedule(keep)


@dataclass(frozen=True)
class CategoricalVar:
    vocab_size: int
    value: int

    def __post_init__(self):
        if not 0 <= self.value < self.vocab_size:
            raise ValueError(f"value {self.value} outside vocabulary of size {self.vocab_size}")


def q_sample_array(
    x0: np.ndarray, vocab_size: int, t: int, schedule: NoiseSchedule, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized forward corruption of an integer array."""
    x0 = np.asarray(x0, dtype=np.int64)
    keep = schedule.keep(t)
    keep_mask = rng.random(x0.shape) < keep
    noise = rng.integers(0, vocab_size, size=x0.shape)
    return np.where(keep_mask, x0, noise)


def q_sample(
    x0: CategoricalVar, t: int, schedule: NoiseSchedule, rng: np.random.Generator
) -> CategoricalVar:
    value = int(q_sample_array(np.array([x0.value]), x0.vocab_size, t, schedule, rng)[0])
    return CategoricalVar(x0.vocab_size, value)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def posterior_probs_array(
    x0_logits: np.ndarray, xt: np.ndarray, t: int, schedule: NoiseSchedule
) -> np.ndarray:
    """Distribution of x_{t-1} given x_t and predicted clean-category logits.

    For the uniform kernel the posterior factorizes as the product of a
    one-step factor around x_t and the t-1 marginal factor around x0,
    marginalized over x0 ~ softmax(x0_logits).
    """
    logits = np.asarray(x0_logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("x0 logits must be finite")
    schedule._check_step(t)
    p0 = _softmax(logits)
    k = logits.shape[-1]
    if t == 1:
        return p0
    xt = np.asarray(xt, dtype=np.int64)
    step = schedule.step_keep(t)
    prev = schedule.keep(t - 1)
    fac_xt = np.full(logits.shape, (1.0 - step) / k)
    np.put_along_axis(fac_xt, xt[..., None], (1.0 - step) / k + step, axis=-1)
    fac_x0 = prev * p0 + (1.0 - prev) / k
    probs = fac_xt * fac_x0
    return probs / probs.sum(axis=-1, keepdims=True)


def posterior_step_array(
    x0_logits: np.ndarray, xt: np.ndarray, t: int, schedule: NoiseSchedule,
    rng: np.random.Generator,
) -> np.ndarray:
    probs = posterior_probs_array(x0_logits, xt, t, schedule)
    flat = probs.reshape(-1, probs.shape[-1])
    u = rng.random(flat.shape[0])
    cdf = np.cumsum(flat, axis=-1)
    picks = (cdf < u[:, None]).sum(axis=-1)
    picks = np.minimum(picks, probs.shape[-1] - 1)
    return picks.reshape(np.asarray(xt).shape)


def posterior_step(
    x0_logits, xt: CategoricalVar, t: int, schedule: NoiseSchedule, rng: np.random.Generator
) -> CategoricalVar:
    logits = np.asarray(x0_logits, dtype=np.float64).reshape(1, -1)
    if logits.shape[-1] != xt.vocab_size:
        raise ValueError("logit count must equal the vocabulary size")
    value = int(posterior_step_array(logits, np.array([xt.value]), t, schedule, rng)[0])
    return CategoricalVar(xt.vocab_size, value)


def sample_categorical(logits: np.ndarray, rng: np.random.Generator) -> int:
    """Draw from softmax(logits); tolerates -inf entries from masking."""
    logits = np.asarray(logits, dtype=np.float64)
    finite = logits[np.isfinite(logits)]
    if finite.size == 0:
        raise ValueError("all categories are masked")
    shifted = logits - finite.max()
    probs = np.exp(np.where(np.isfinite(shifted), shifted, -np.inf))
    probs = probs / probs.sum()
    return int(rng.choice(probs.size, p=probs))


def ce_loss(x0_logits, x0_true):
    """Cross-entropy between predicted clean-category logits and the truth.

    Accepts an autodiff Tensor (returns a differentiable Tensor) or plain
    arrays (returns a float).
    """
    target = x0_true.value if isinstance(x0_true, CategoricalVar) else int(x0_true)
    if isinstance(x0_logits, Tensor):
        logits2d = x0_logits if x0_logits.data.ndim == 2 else _reshape_row(x0_logits)
        return autodiff.cross_entropy(logits2d, np.array([target] * logits2d.data.shape[0]))
    logits = np.asarray(x0_logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    shifted = logits - logits.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[target])


def _reshape_row(t: Tensor) -> Tensor:
    out = autodiff._node(t.data.reshape(1, -1), (t,))
    if out._parents:
        out._backward = lambda g: autodiff._add_grad(t, g.reshape(t.data.shape))
    return out
