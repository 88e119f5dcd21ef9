"""Hyperparameter estimation.

alpha and the decay scale are fitted by gradient ascent on the link prior
log P(c), interleaved with sampling; eta is set once from corpus unigram
statistics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .model import Hyperparams, candidate_bounds

logger = logging.getLogger(__name__)

DEFAULT_ETA = 0.1
ETA_FLOOR = 1e-4


@dataclass(frozen=True)
class HyperUpdateConfig:
    step_alpha: float = 0.01
    step_decay: float = 0.01
    period: int = 10
    clip: float = 10.0

    def __post_init__(self):
        if self.step_alpha <= 0 or self.step_decay <= 0:
            raise ValueError("step sizes must be positive")
        if self.period < 1:
            raise ValueError("period must be >= 1")


def log_prior_and_gradient(links: Sequence[int], times: Sequence[float], alpha: float,
                           decay_scale: float, sequential: bool = False,
                           ) -> tuple[float, float, float]:
    """Value of log P(c) and its derivatives w.r.t. log alpha and log a.

    With f_ij = exp(-|dt_ij| / a) and Z_i = alpha + sum_j f_ij over the
    candidates of i:

        d log P / d log alpha = sum_i [c_i = i] - alpha / Z_i
        d log P / d log a     = sum_i [c_i != i] dt_ic / a - sum_j f_ij dt_ij / (a Z_i)
    """
    links = np.asarray(links, dtype=np.int64)
    times = np.asarray(times, dtype=np.float64)
    n = links.size
    value = g_alpha = g_decay = 0.0
    for i in range(n):
        lo, hi = candidate_bounds(i, n, sequential)
        dt = np.abs(times[lo:hi] - times[i]) / decay_scale
        f = np.exp(-dt)
        if lo <= i < hi:
            f[i - lo] = 0.0
        z = alpha + f.sum()
        c = int(links[i])
        if c == i:
            value += math.log(alpha / z)
            g_alpha += 1.0
        else:
            value += math.log(f[c - lo] / z) if f[c - lo] > 0 else -math.inf
            g_decay += dt[c - lo]
        g_alpha -= alpha / z
        g_decay -= float(f @ dt) / z
    return value, g_alpha, g_decay


def gradient_step(state, config: HyperUpdateConfig = HyperUpdateConfig()) -> Hyperparams:
    """One clipped ascent step on (log alpha, log a) for the current links.

    ``state`` is a :class:`~storyline.sampler.SamplerState`; eta is left
    untouched and the partition is not modified.
    """
    hyper = state.hyper
    _, g_alpha, g_decay = log_prior_and_gradient(
        state.link, state.times, hyper.alpha, hyper.decay_scale, state.sequential)
    g_alpha = float(np.clip(g_alpha, -config.clip, config.clip))
    g_decay = float(np.clip(g_decay, -config.clip, config.clip))
    return replace(
        hyper,
        alpha=hyper.alpha * math.exp(config.step_alpha * g_alpha),
        decay_scale=hyper.decay_scale * math.exp(config.step_decay * g_decay),
    )


def estimate_eta(vocabulary) -> float:
    """Set eta from the unigram probabilities of words that occur exactly once.

    eta = ((K - 1) / 2) / |sum_k log p_k| over the K singleton words. The sum
    of log probabilities is negative, so its magnitude is used.
    """
    freq = np.asarray(vocabulary.frequencies)
    singletons = freq == 1
    k = int(singletons.sum())
    if freq.size < 2 or k <= 1:
        logger.warning("too few singleton words (%d) to estimate eta; using %g", k, DEFAULT_ETA)
        return DEFAULT_ETA
    log_p = np.log(freq[singletons] / freq.sum())
    return max(((k - 1) / 2.0) / abs(float(log_p.sum())), ETA_FLOOR)
