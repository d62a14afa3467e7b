"""Brute-force index by optimal stopping over the always-play history tree.

For a stopping rule tau (number of plays, 1 <= tau <= depth) adapted to the
observation/availability history, the reward rate is

    (1 - beta) * E[sum_{t=1}^{tau} beta^(t-1) R_t] / (1 - E[beta^tau]).

The supremum over rules is the unique ``lam`` at which the best achievable
``E[sum_{t<=tau} beta^(t-1) (R_t - lam)]`` is zero, because the denominator
is positive for every rule. That inner maximum is an exact backward
induction over the finite tree, so the supremum is found by root-finding in
``lam``. Beliefs are propagated exactly; there is no grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import model
from .errors import DepthTooLarge
from .model import ArmParams

DEFAULT_NODE_BUDGET = 2_000_000


@dataclass
class _Level:
    pi: np.ndarray
    y: np.ndarray
    reward: np.ndarray
    # successor indices into the next level and their probabilities, (m, 4)
    child: np.ndarray
    prob: np.ndarray


@dataclass
class OracleResult:
    value: float
    truncation_bound: float
    nodes: int
    depth: int


def _expand(params: ArmParams, pi: float, y: int, depth: int, node_budget: int) -> list[_Level]:
    levels: list[_Level] = []
    cur = [(float(pi), int(y))]
    nodes = 0
    for d in range(depth):
        nodes += len(cur)
        if nodes > node_budget:
            raise DepthTooLarge(f"history tree exceeds {node_budget} nodes at depth {d + 1}")
        pis = np.array([s[0] for s in cur])
        ys = np.array([s[1] for s in cur])
        reward = np.where(ys == 1, model.expected_play_reward(params, pis, 1),
                          model.expected_play_reward(params, pis, 0))
        child = np.zeros((len(cur), 4), dtype=np.int64)
        prob = np.zeros((len(cur), 4))
        nxt: dict[tuple[float, int], int] = {}
        if d < depth - 1:
            for i, (p, yy) in enumerate(cur):
                p_succ = model.success_prob(params, p)
                avail = params.theta[1][yy]
                k = 0
                for z, pz in ((1, p_succ), (0, 1.0 - p_succ)):
                    if pz <= 0.0:
                        continue
                    q = model.gamma_update(params, p, z, yy)
                    for y2, py in ((1, avail), (0, 1.0 - avail)):
                        if py <= 0.0:
                            continue
                        key = (float(q), y2)
                        j = nxt.setdefault(key, len(nxt))
                        child[i, k] = j
                        prob[i, k] = pz * py
                        k += 1
        levels.append(_Level(pis, ys, reward, child, prob))
        cur = list(nxt)
    return levels


def _best_margin(levels: list[_Level], beta: float, lam: float) -> float:
    """max over stopping rules of E[sum beta^(t-1) (R_t - lam)], first play forced."""
    g = levels[-1].reward - lam
    for lev in reversed(levels[:-1]):
        cont = np.maximum(g, 0.0)[lev.child] * lev.prob
        g = lev.reward - lam + beta * cont.sum(axis=1)
    return float(g[0])


def stopping_time_oracle(params: ArmParams, pi: float, y: int, beta: float, max_depth: int,
                         node_budget: int = DEFAULT_NODE_BUDGET, xtol: float = 1e-13) -> OracleResult:
    """Supremum of the reward rate over stopping rules with at most ``max_depth`` plays."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    levels = _expand(params, pi, y, max_depth, node_budget)
    nodes = sum(len(lev.pi) for lev in levels)
    lo = params.min_reward - 1e-9
    hi = params.max_reward + 1e-9
    value = optimize.brentq(lambda lam: _best_margin(levels, beta, lam), lo, hi, xtol=xtol)
    bd = beta ** max_depth
    bound = bd / (1.0 - bd) * params.r1
    return OracleResult(float(value), bound, nodes, max_depth)
