"""Successive convex power allocation for fixed combiners, reflection,
blocklength, and grouping.

The bottleneck objective chi = min_k g_k is maximized by bisection on chi:
at a fixed target, the SINR requirement gamma_k >= eta_k(chi) combines with
the detection balance

    X_k p_k  >=  sum_j G_kj * (lam/2 * gamma_k^2 + p_j^2 / (2 lam)) + gamma_k * sigma2

over the later-decoded group-mates j, where the product gamma_k * p_j has
been replaced by its arithmetic-geometric upper bound (tight at
lam = p_j / gamma_k).  Each bisection step is an exact convex-quadratic
feasibility check; the surrogate parameters lam are refreshed at the
returned iterate, which keeps the chi sequence non-decreasing from the
second round on.

Feasible points of the surrogate are feasible for the true SINR system, so
every chi this module reports is actually achieved by the returned powers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelRealization
from .config import Allocation, SystemConfig
from .conic import QuadConstraint, QuadFeasibility, solve_quad_feasibility
from .metrics import LN2, effective_gains, g_values

__all__ = [
    "PowerIterate",
    "GainCache",
    "cache_gains",
    "eta_threshold",
    "default_power_init",
    "solve_p4_subproblem",
    "sca_power",
    "chi_of_powers",
]

P_FLOOR = 1e-9  # implements the strictly-positive power constraint
LAM_FLOOR = 1e-8
LAM_CAP = 1e12


@dataclass(frozen=True, eq=False)
class GainCache:
    """Signal gains, interference gain matrix, and group structure."""

    X: np.ndarray  # (K,) |w_k^H q_k|^2
    G: np.ndarray  # (K, K) interference gains, zero off-group
    groups: tuple[tuple[int, ...], ...]


@dataclass(frozen=True, eq=False)
class PowerIterate:
    p: np.ndarray
    gamma: np.ndarray
    lam: np.ndarray  # (K, K) surrogate parameters, meaningful where G > 0
    chi: float


def cache_gains(ch: ChannelRealization, alloc: Allocation, cfg: SystemConfig) -> GainCache:
    X, G = effective_gains(ch, alloc, cfg)
    return GainCache(X=X, G=G, groups=alloc.groups)


def eta_threshold(chi: float, m: float, D) -> np.ndarray:
    """Minimum SINR making g_k reach chi: 2^(chi/(sqrt(m) ln2) + D/m) - 1."""
    D = np.asarray(D, dtype=float)
    expo = np.clip(chi / (np.sqrt(m) * LN2) + D / m, -500.0, 500.0)
    return np.exp2(expo) - 1.0


def chi_of_powers(p: np.ndarray, gains: GainCache, m: float, D, sigma2: float) -> float:
    """True bottleneck g at the given powers (V = 1)."""
    gamma = gains.X * p / (gains.G @ p + sigma2)
    return float(np.min(g_values(gamma, m, D)))


def default_power_init(cfg: SystemConfig, m: float) -> np.ndarray:
    """Uniform powers at 0.9 of the budget share, clipped to the box."""
    share = 0.9 * cfg.E0 / (cfg.T_sym * m * cfg.K)
    return np.minimum(np.asarray(cfg.p_max, dtype=float), share)


def _build_system(
    chi: float, lam: np.ndarray, gains: GainCache, cfg: SystemConfig, m: float
) -> QuadFeasibility | None:
    """Feasibility system at a fixed chi; None when trivially infeasible."""
    K = cfg.K
    eta = eta_threshold(chi, m, cfg.D)
    if np.any((gains.X <= 0) & (eta > 0)):
        return None
    nvar = 2 * K  # [p_0..p_{K-1}, gamma_0..gamma_{K-1}]
    lb = np.concatenate([np.full(K, P_FLOOR), np.maximum(eta, 0.0)])
    ub = np.concatenate([np.asarray(cfg.p_max, dtype=float), np.full(K, np.inf)])
    quads = []
    for k in range(K):
        a = np.zeros(nvar)
        c = np.zeros(nvar)
        a[k] = gains.X[k]
        a[K + k] = -cfg.sigma2
        interferers = np.flatnonzero(gains.G[k])
        for j in interferers:
            c[K + k] += gains.G[k, j] * lam[k, j] / 2.0
            c[j] += gains.G[k, j] / (2.0 * lam[k, j])
        quads.append(QuadConstraint(a=a, c=c, d=0.0))
    budget = np.zeros(nvar)
    budget[:K] = cfg.T_sym * m
    return QuadFeasibility(
        lb=lb, ub=ub, quads=tuple(quads), linear_leq=((budget, cfg.E0),)
    )


def solve_p4_subproblem(
    chi: float, lam: np.ndarray, gains: GainCache, cfg: SystemConfig, m: float
):
    """Feasibility of the surrogate power system at a fixed chi target.

    Returns (feasible, p, gamma); the point is the least-power solution.
    """
    prob = _build_system(chi, lam, gains, cfg, m)
    if prob is None:
        return False, None, None
    x, status = solve_quad_feasibility(prob)
    if status == "numerical_failure":
        raise RuntimeError("quadratic feasibility backend failed")
    if status != "feasible":
        return False, None, None
    K = cfg.K
    return True, x[:K], x[K:]


def _chi_upper_bound(gains: GainCache, cfg: SystemConfig, m: float) -> float:
    gamma_ub = gains.X * np.asarray(cfg.p_max) / cfg.sigma2
    best = float(np.max(gamma_ub, initial=0.0))
    return float(np.sqrt(m) * LN2 * (np.log2(1.0 + best) - min(cfg.D) / m))


def sca_power(
    ch_or_gains,
    alloc: Allocation | None,
    cfg: SystemConfig,
    init: PowerIterate | None = None,
):
    """Run the surrogate-refresh loop; returns the final PowerIterate and
    the per-round chi trace.

    Accepts either a ChannelRealization plus the fixed allocation, or a
    prebuilt GainCache (alloc then only supplies m and groups).  Without an
    explicit ``init`` the powers start uniform at 0.9 of the budget share
    and every surrogate parameter starts at 1.
    """
    if isinstance(ch_or_gains, GainCache):
        gains = ch_or_gains
    else:
        gains = cache_gains(ch_or_gains, alloc, cfg)
    m = float(alloc.m)
    K = cfg.K
    if cfg.T_sym * m * K * P_FLOOR > cfg.E0:
        raise ValueError("energy budget cannot cover the minimum power floor")

    if init is not None:
        p = np.asarray(init.p, dtype=float).copy()
        lam = np.asarray(init.lam, dtype=float).copy()
    else:
        p = default_power_init(cfg, m)
        lam = np.ones((K, K))

    hi_cap = _chi_upper_bound(gains, cfg, m) + 1.0
    tol = max(cfg.eps_p * 0.05, 1e-9)
    chi_prev = None
    trace: list[float] = []
    best = PowerIterate(p=p, gamma=np.zeros(K), lam=lam, chi=-np.inf)

    for _ in range(cfg.Ip_max):
        lo = chi_of_powers(p, gains, m, cfg.D, cfg.sigma2)
        feas, p_lo, g_lo = solve_p4_subproblem(lo, lam, gains, cfg, m)
        if not feas:
            # surrogate may cut off the incumbent in the first round; widen down
            step = 1.0
            while not feas and step < 2.0 ** 40:
                lo -= step
                step *= 2.0
                feas, p_lo, g_lo = solve_p4_subproblem(lo, lam, gains, cfg, m)
            if not feas:
                break
        hi = hi_cap
        while hi - lo > tol:
            mid = 0.5 * (hi + lo)
            feas_mid, p_mid, g_mid = solve_p4_subproblem(mid, lam, gains, cfg, m)
            if feas_mid:
                lo, p_lo, g_lo = mid, p_mid, g_mid
            else:
                hi = mid
        chi_i = lo
        trace.append(chi_i)
        gamma_i = np.asarray(g_lo)
        p = np.asarray(p_lo)
        if chi_i > best.chi:
            best = PowerIterate(p=p.copy(), gamma=gamma_i.copy(), lam=lam.copy(), chi=chi_i)
        if chi_prev is not None and abs(chi_i - chi_prev) <= cfg.eps_p:
            break
        chi_prev = chi_i
        new_lam = lam.copy()
        for k in range(K):
            for j in np.flatnonzero(gains.G[k]):
                g_k = max(gamma_i[k], LAM_FLOOR)
                new_lam[k, j] = float(np.clip(p[j] / g_k, LAM_FLOOR, LAM_CAP))
        lam = new_lam

    return best, trace


def tight_lambda(p: np.ndarray, gains: GainCache, sigma2: float) -> np.ndarray:
    """Surrogate parameters that make the product bound exact at p.

    Seeding the loop with these guarantees the incumbent powers stay
    feasible in the very first round.
    """
    K = len(p)
    gamma = gains.X * p / (gains.G @ p + sigma2)
    lam = np.ones((K, K))
    for k in range(K):
        for j in np.flatnonzero(gains.G[k]):
            lam[k, j] = float(np.clip(p[j] / max(gamma[k], LAM_FLOOR), LAM_FLOOR, LAM_CAP))
    return lam
