"""Arm selection over Monte Carlo statistics: UCB1 and Beta-Bernoulli Thompson sampling.

The jitted ``*_index`` kernels operate on parallel ``n``/``w`` float arrays and
are what the tree search calls; the ``*_select`` functions are the list-of-arms
front end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .rng import RngStream, normal, uniform, uniform_open

__all__ = [
    "ArmStats",
    "DEFAULT_C",
    "beta_sample",
    "simulate",
    "thompson_index",
    "thompson_select",
    "ucb1_index",
    "ucb1_scores",
    "ucb1_select",
]

DEFAULT_C = math.sqrt(2.0)
UCB1 = 0
THOMPSON = 1


@dataclass
class ArmStats:
    n: float = 0.0
    w: float = 0.0

    def __post_init__(self):
        if not 0 <= self.w <= self.n:
            raise ValueError(f"need 0 <= w <= n, got n={self.n}, w={self.w}")


@njit(cache=True)
def log_gamma_sample(a, s):
    """log of a Gamma(a, 1) draw (Marsaglia-Tsang, boosted when a < 1)."""
    boost = 0.0
    if a < 1.0:
        boost = np.log(uniform_open(s)) / a
        a += 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    while True:
        x = normal(s)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = uniform_open(s)
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2 or np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(v)):
            return np.log(d * v) + boost


_LO = np.nextafter(0.0, 1.0)
_HI = np.nextafter(1.0, 0.0)


@njit(cache=True)
def beta_draw(a, b, s):
    la = log_gamma_sample(a, s)
    lb = log_gamma_sample(b, s)
    # G_a / (G_a + G_b), evaluated in log space so tiny shapes cannot underflow
    x = 1.0 / (1.0 + np.exp(lb - la))
    return min(max(x, _LO), _HI)


@njit(cache=True)
def thompson_index(n, w, s):
    best = 0
    best_q = -1.0
    for j in range(n.shape[0]):
        q = beta_draw(w[j] + 1.0, n[j] - w[j] + 1.0, s)
        if q > best_q:
            best_q = q
            best = j
    return best


@njit(cache=True)
def ucb1_index(n, w, c):
    total = 0.0
    for j in range(n.shape[0]):
        if n[j] <= 0.0:
            return j
        total += n[j]
    log_total = np.log(total)
    best = 0
    best_score = -np.inf
    for j in range(n.shape[0]):
        score = w[j] / n[j] + c * np.sqrt(log_total / n[j])
        if score > best_score:
            best_score = score
            best = j
    return best


def _arrays(arms: Sequence[ArmStats]) -> tuple[np.ndarray, np.ndarray]:
    if len(arms) == 0:
        raise ValueError("no arms to select from")
    n = np.array([a.n for a in arms], dtype=np.float64)
    w = np.array([a.w for a in arms], dtype=np.float64)
    return n, w


def ucb1_scores(arms: Sequence[ArmStats], c: float = DEFAULT_C) -> np.ndarray:
    """Per-arm UCB1 values; +inf for unvisited arms."""
    n, w = _arrays(arms)
    total = n.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = w / n + c * np.sqrt(np.log(total) / n)
    scores[n <= 0] = np.inf
    return scores


def ucb1_select(arms: Sequence[ArmStats], c: float = DEFAULT_C) -> int:
    """argmax of mean + c*sqrt(ln(n)/n_j); unvisited arms first, ties to lowest index."""
    n, w = _arrays(arms)
    return int(ucb1_index(n, w, c))


def thompson_select(arms: Sequence[ArmStats], rng: RngStream) -> int:
    """argmax over q_j ~ Beta(w_j + 1, n_j - w_j + 1)."""
    n, w = _arrays(arms)
    return int(thompson_index(n, w, rng.state))


def beta_sample(alpha: float, beta: float, rng: RngStream) -> float:
    if not (alpha > 0 and beta > 0):
        raise ValueError(f"Beta parameters must be positive, got ({alpha}, {beta})")
    return float(beta_draw(float(alpha), float(beta), rng.state))


@njit(cache=True)
def _simulate(probs, pulls, policy, c, s, chosen):
    k = probs.shape[0]
    n = np.zeros(k)
    w = np.zeros(k)
    for t in range(pulls):
        if policy == UCB1:
            j = ucb1_index(n, w, c)
        else:
            j = thompson_index(n, w, s)
        chosen[t] = j
        n[j] += 1.0
        if uniform(s) < probs[j]:
            w[j] += 1.0


def simulate(probs, pulls: int, policy: str, rng: RngStream, c: float = DEFAULT_C) -> np.ndarray:
    """Run a Bernoulli bandit and return the arm chosen at each pull."""
    code = {"ucb1": UCB1, "thompson": THOMPSON}[policy]
    chosen = np.empty(pulls, dtype=np.int64)
    _simulate(np.asarray(probs, dtype=np.float64), pulls, code, c, rng.state, chosen)
    return chosen
