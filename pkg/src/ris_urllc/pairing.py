"""Bottleneck user pairing: maximize, over perfect strong-weak matchings,
the smallest per-pair reliability exponent.

Each candidate pair is scored in isolation (slots are orthogonal, so no
inter-pair interference exists): the strong user is decoded first against
the weak user's signal, the weak user is decoded clean, and the edge weight
is min(g_strong, g_weak) at the current powers, combiners, reflection, and
blocklength.  The optimal matching is found by thresholding: keep edges at
or above a candidate level, ask a maximum-weight assignment for a perfect
match among them, and binary-search the level.  Searching the finite set
of distinct weights is exact; the classic interval bisection with an
accuracy knob is kept behind ``cfg.pairing_continuous``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channels import ChannelRealization
from .config import Allocation, SystemConfig
from .metrics import g_values

__all__ = [
    "PairWeightMatrix",
    "pair_weights",
    "hungarian_assign",
    "bottleneck_pairing",
]


@dataclass(frozen=True, eq=False)
class PairWeightMatrix:
    strong: tuple[int, ...]  # row users
    weak: tuple[int, ...]  # column users
    e: np.ndarray  # (K/2, K/2) bottleneck exponents


def pair_weights(
    ch: ChannelRealization,
    alloc: Allocation,
    strong: tuple[int, ...],
    weak: tuple[int, ...],
    cfg: SystemConfig,
) -> PairWeightMatrix:
    """Exact per-pair bottleneck values for every strong-weak combination."""
    from .metrics import combined_channel

    q = [combined_channel(ch.H, alloc.phi, f_k) for f_k in ch.f]
    w = np.asarray(alloc.w)
    p = np.asarray(alloc.p, dtype=float)
    D = np.asarray(cfg.D, dtype=float)
    m = float(alloc.m)
    X = np.array([np.abs(np.vdot(w[k], q[k])) ** 2 for k in range(cfg.K)])
    e = np.empty((len(strong), len(weak)))
    for i, s in enumerate(strong):
        for j, wk in enumerate(weak):
            if cfg.conventional_interference:
                cross = np.abs(np.vdot(w[s], q[wk])) ** 2
            else:
                cross = X[wk]
            gamma_s = X[s] * p[s] / (cross * p[wk] + cfg.sigma2)
            gamma_w = X[wk] * p[wk] / cfg.sigma2
            g_s = float(g_values(np.array([gamma_s]), m, D[s])[0])
            g_w = float(g_values(np.array([gamma_w]), m, D[wk])[0])
            e[i, j] = min(g_s, g_w)
    return PairWeightMatrix(strong=tuple(strong), weak=tuple(weak), e=e)


def _assignment_value(weights: np.ndarray) -> float:
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return float(weights[rows, cols].sum())


def hungarian_assign(weights: np.ndarray) -> list[tuple[int, int]]:
    """Maximum-total-weight perfect assignment on a square matrix.

    Ties resolve to the lexicographically smallest assignment vector
    (row 0's column first), fixed by sequentially committing the smallest
    column that preserves optimality.
    """
    weights = np.asarray(weights, dtype=float)
    n, m = weights.shape
    if n != m:
        raise ValueError(f"assignment matrix must be square, got {weights.shape}")
    if not np.isfinite(weights).all():
        raise ValueError("assignment weights must be finite")
    total = _assignment_value(weights)
    tol = 1e-9 * max(1.0, np.abs(weights).max()) * n
    result: list[tuple[int, int]] = []
    remaining = list(range(m))
    committed = 0.0
    for i in range(n):
        rest_rows = np.arange(i + 1, n)
        for j in sorted(remaining):
            rest_cols = [c for c in remaining if c != j]
            sub_val = (
                _assignment_value(weights[np.ix_(rest_rows, rest_cols)])
                if rest_rows.size
                else 0.0
            )
            if committed + weights[i, j] + sub_val >= total - tol:
                result.append((i, j))
                committed += weights[i, j]
                remaining.remove(j)
                break
        else:
            raise RuntimeError("no optimality-preserving column found")
    return result


def _perfect_match_at(e: np.ndarray, level: float) -> list[tuple[int, int]] | None:
    """Perfect matching using only edges >= level, or None."""
    mask = (e >= level).astype(float)
    match = hungarian_assign(mask)
    if all(mask[i, j] == 1.0 for i, j in match):
        return match
    return None


def bottleneck_pairing(
    weights: PairWeightMatrix, cfg: SystemConfig
) -> tuple[dict[int, int], float]:
    """Maximize the minimum selected edge weight over perfect matchings.

    Returns (strong -> weak map, achieved bottleneck value).  The default
    search bisects the sorted distinct weights exactly; the continuous
    variant bisects [min, max] to within eps_u and then settles on the
    highest admissible exact level.
    """
    e = weights.e
    levels = np.unique(e)
    if cfg.pairing_continuous:
        # every edge admits at the lowest weight, so `lo` stays feasible
        lo, hi = float(levels[0]), float(levels[-1])
        it = 0
        while hi - lo > cfg.eps_u and it < cfg.Iu_max:
            mid = 0.5 * (lo + hi)
            if _perfect_match_at(e, mid) is not None:
                lo = mid
            else:
                hi = mid
            it += 1
        level = lo
    else:
        lo_i, hi_i = 0, len(levels) - 1
        # invariant: a perfect matching exists at levels[lo_i]
        while lo_i < hi_i:
            mid = (lo_i + hi_i + 1) // 2
            if _perfect_match_at(e, float(levels[mid])) is not None:
                lo_i = mid
            else:
                hi_i = mid - 1
        level = float(levels[lo_i])
    match = _perfect_match_at(e, level)
    assert match is not None
    mapping = {weights.strong[i]: weights.weak[j] for i, j in match}
    chi_match = float(min(e[i, j] for i, j in match))
    return mapping, chi_match
