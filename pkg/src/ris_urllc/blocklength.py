"""Blocklength choice for fixed powers, combiners, and reflection.

With everything else frozen the per-user exponent

    g_k(m) = sqrt(m) * ln(1 + gamma_k) - ln2 * D_k / sqrt(m)

is strictly increasing in m whenever gamma_k > 0 (both terms grow), so the
continuous optimum simply sits at the tightest cap: the slot's symbol
budget floor(T / T_sym) or the energy frontier E0 / (T_sym * sum p).  The
greedy integer conversion starts at the floor of that optimum and keeps
adding one symbol while the energy, latency, and incumbent-target
constraints all still hold.
"""

from __future__ import annotations

import math

import numpy as np

from .config import SystemConfig, blocklength_cap
from .metrics import g_values

__all__ = ["optimize_blocklength", "greedy_round"]


def optimize_blocklength(
    gamma: np.ndarray, p: np.ndarray, cfg: SystemConfig
) -> tuple[float, float]:
    """Continuous blocklength maximizing min_k g_k; returns (m, chi).

    Requires every user to clear its rate floor eventually
    (log2(1 + gamma_k) > 0) and the energy budget to afford one symbol.
    """
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0):
        raise ValueError("blocklength step needs strictly positive SINRs")
    m_energy = cfg.E0 / (cfg.T_sym * float(np.sum(p)))
    m_ub = min(float(blocklength_cap(cfg)), m_energy)
    if m_ub < 1.0:
        raise ValueError(
            f"energy budget affords only {m_ub:.3f} symbols at these powers"
        )
    chi = float(np.min(g_values(gamma, m_ub, cfg.D)))
    return m_ub, chi


def greedy_round(
    m_real: float, p: np.ndarray, gamma: np.ndarray, cfg: SystemConfig, chi_target: float | None = None
) -> int:
    """Integerize the relaxed blocklength by upward greedy search.

    Starts at floor(m_real); increments while the energy budget, the
    latency cap, and (when given) the incumbent bottleneck target stay
    satisfied.  The floor itself is feasible by construction of m_real.
    """
    if m_real < 1.0:
        raise ValueError(f"relaxed blocklength {m_real} below one symbol")
    cap = blocklength_cap(cfg)
    psum = float(np.sum(p))
    m = int(math.floor(m_real + 1e-12))

    def ok(m_try: int) -> bool:
        if m_try > cap:
            return False
        if cfg.T_sym * m_try * psum > cfg.E0 + 1e-12:
            return False
        if chi_target is not None:
            chi = float(np.min(g_values(np.asarray(gamma, float), float(m_try), cfg.D)))
            if chi < chi_target - 1e-12:
                return False
        return True

    while ok(m + 1):
        m += 1
    return m
