"""Reflection design by penalty-driven successive convexification on the
lifted matrix S = phi phi^H.

For fixed powers, combiners, and blocklength the reflection must satisfy,
at the working bottleneck target chi,

    eta_k * ( sum_{j later} tr(L_j S) p_j + sigma2 )  <=  tr(L_k S) p_k,

with unit diagonal and S PSD.  Rank-one pressure comes from the
nuclear-minus-spectral gap: with the diagonal pinned, the nuclear norm of
S is the constant N, so minimizing the penalized gap is exactly maximizing
the linearized spectral norm tr(u u^H S) around the current principal
direction u.  The penalty weight only rescales that objective and is
therefore fixed at 1 (no schedule).

A feasible rank-one iterate is a fixed point: tr(u u^H S) <= tr(S) = N with
equality only at S = N u u^H, so the subproblem cannot move it.  The loop
detects that case and returns the extracted direction immediately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelRealization
from .config import Allocation, SystemConfig, rng_stream
from .conic import (
    ConeProgram,
    ExtractionError,
    TraceConstraint,
    gaussian_randomization,
    solve_sdp,
)
from .metrics import g_values

__all__ = [
    "PhaseSdrState",
    "PhaseInfeasible",
    "build_effective_channels",
    "linearize_spectral",
    "penalty_sca_phase",
    "max_chi_phase",
]

RANK_RESIDUAL_TOL = 1e-6
FEAS_TOL = 1e-7


class PhaseInfeasible(RuntimeError):
    """No reflection meeting the constraints at the requested chi was found."""


@dataclass(frozen=True, eq=False)
class PhaseSdrState:
    """One penalty-SCA iterate."""

    S: np.ndarray  # (N, N) Hermitian PSD, unit diagonal
    mu: float
    u_max: np.ndarray  # principal eigenvector of the previous iterate
    rank_residual: float  # 1 - lambda_max(S) / tr(S)


def build_effective_channels(ch: ChannelRealization, w: np.ndarray) -> list[np.ndarray]:
    """Per-user N x N Gram matrices L_k with tr(L_k phi phi^H) = |w_k^H q_k|^2.

    L_k = l_k^H l_k for the row vector l_k = w_k^H H^H diag(f_k).
    """
    out = []
    w = np.asarray(w)
    for k, f_k in enumerate(ch.f):
        l_k = (w[k].conj() @ ch.H.conj().T) * f_k  # row of length N
        Lk = np.outer(l_k.conj(), l_k)
        out.append(0.5 * (Lk + Lk.conj().T))
    return out


def _cross_effective(ch: ChannelRealization, w: np.ndarray, k: int, j: int) -> np.ndarray:
    # cross form: combiner of user k applied to the channel of user j
    l = (np.asarray(w)[k].conj() @ ch.H.conj().T) * ch.f[j]
    L = np.outer(l.conj(), l)
    return 0.5 * (L + L.conj().T)


def linearize_spectral(S: np.ndarray) -> tuple[float, np.ndarray]:
    """Spectral norm of a Hermitian matrix and its affine-minorant gradient.

    Returns (||S||_2, u u^H) for the unit eigenvector u of the largest
    eigenvalue; ties resolve to the decomposition's last column, which is
    deterministic for fixed input.  For all Hermitian S':
    ||S'||_2 >= ||S||_2 + tr(u u^H (S' - S)) on the PSD cone.
    """
    S = np.asarray(S)
    vals, vecs = np.linalg.eigh(0.5 * (S + S.conj().T))
    u = vecs[:, -1]
    return float(vals[-1]), np.outer(u, u.conj())


def _phase_project(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    mod = np.abs(v)
    return np.where(mod > 0, v / np.where(mod > 0, mod, 1.0), 1.0 + 0.0j)


def _constraint_rows(
    ch: ChannelRealization, alloc: Allocation, eta: np.ndarray, cfg: SystemConfig
) -> list[tuple[np.ndarray, float]]:
    """Rows (A, b) meaning Re tr(A S) <= b, normalized to unit scale."""
    L = build_effective_channels(ch, alloc.w)
    p = np.asarray(alloc.p, dtype=float)
    rows = []
    for g in alloc.groups:
        for i, k in enumerate(g):
            A = -p[k] * L[k]
            for j in g[i + 1 :]:
                Lj = _cross_effective(ch, alloc.w, k, j) if cfg.conventional_interference else L[j]
                A = A + eta[k] * p[j] * Lj
            b = -eta[k] * cfg.sigma2
            s = max(np.abs(A).max(), abs(b), 1e-300)
            rows.append((A / s, b / s))
    return rows


def _true_min_g(ch, alloc: Allocation, phi: np.ndarray, cfg: SystemConfig) -> float:
    from .metrics import effective_gains

    trial = alloc.replace(phi=np.asarray(phi, dtype=complex))
    X, G = effective_gains(ch, trial, cfg)
    p = np.asarray(alloc.p, dtype=float)
    gamma = X * p / (G @ p + cfg.sigma2)
    return float(np.min(g_values(gamma, alloc.m, cfg.D)))


def penalty_sca_phase(
    ch: ChannelRealization,
    alloc: Allocation,
    chi: float,
    cfg: SystemConfig,
    S_init: np.ndarray | None = None,
) -> np.ndarray:
    """Seek a unit-modulus reflection feasible at the given chi.

    Iterates the linearized-spectral subproblem from S_init (default: the
    lift of the allocation's current reflection), stops on rank residual
    below 1e-6, iterate change below eps_r, or the iteration cap, then
    extracts the principal direction.  If the extracted vector misses the
    true constraints at chi, falls back to scored Gaussian randomization;
    raises PhaseInfeasible when nothing feasible emerges.
    """
    N = cfg.N
    from .power import eta_threshold

    eta = eta_threshold(chi, float(alloc.m), cfg.D)
    rows = _constraint_rows(ch, alloc, eta, cfg)

    def phi_feasible(phi) -> bool:
        return _true_min_g(ch, alloc, phi, cfg) >= chi - FEAS_TOL

    if N == 1:
        phi = np.array([1.0 + 0.0j])
        if phi_feasible(phi):
            return phi
        raise PhaseInfeasible(f"no scalar reflection meets chi={chi:.6g}")

    if S_init is None:
        S = np.outer(alloc.phi, np.asarray(alloc.phi).conj())
    else:
        S = np.asarray(S_init, dtype=complex)
    S = 0.5 * (S + S.conj().T)

    def residual(Smat) -> float:
        vals = np.linalg.eigvalsh(Smat)
        tr = float(np.sum(vals))
        return 1.0 - float(vals[-1]) / tr if tr > 0 else 1.0

    def rows_ok(Smat) -> bool:
        return all(float(np.real(np.trace(A @ Smat))) <= b + FEAS_TOL for A, b in rows)

    def principal(Smat) -> np.ndarray:
        return np.linalg.eigh(Smat)[1][:, -1]

    state = PhaseSdrState(S=S, mu=1.0, u_max=principal(S), rank_residual=residual(S))

    # a feasible rank-one start is already the subproblem's unique optimum
    if state.rank_residual < 1e-9 and rows_ok(S):
        phi = _phase_project(principal(S))
        if phi_feasible(phi):
            return phi

    constraints = tuple(
        TraceConstraint(mats={0: A}, sense="<=", rhs=b) for A, b in rows
    )
    lam_verified = None  # spectral value of the last certified iterate
    for _ in range(cfg.Ir_max):
        _, grad = linearize_spectral(state.S)
        prog = ConeProgram(blocks=(N,), objective={0: grad}, constraints=constraints, diag_one=True)
        res = solve_sdp(prog)
        if res.status == "infeasible":
            raise PhaseInfeasible(f"reflection program infeasible at chi={chi:.6g}")
        if res.X is None:
            raise PhaseInfeasible(
                f"reflection program unresolved at chi={chi:.6g}: {res.detail}"
            )
        # an unverified boundary iterate is still a usable search direction:
        # the extraction below re-validates against the true constraints
        S_new = res.X[0]
        vals_new = np.linalg.eigvalsh(S_new)
        lam_new = float(vals_new[-1])
        # with the diagonal pinned, the nuclear norm is the constant N,
        # which is exactly why the penalty reduces to the spectral term
        nuclear = float(np.abs(vals_new).sum())
        if abs(nuclear - N) > 1e-6 * N:
            raise RuntimeError(f"nuclear norm {nuclear:.8f} drifted from {N}")
        if res.status == "optimal":
            # minorize-maximize: certified iterates cannot lose spectral mass
            if lam_verified is not None and lam_new < lam_verified - 1e-8 * max(1.0, lam_verified):
                raise RuntimeError("spectral objective decreased across iterations")
            lam_verified = lam_new
        else:
            lam_verified = None
        step = float(np.abs(S_new - state.S).max())
        state = PhaseSdrState(
            S=S_new, mu=1.0, u_max=principal(S_new), rank_residual=residual(S_new)
        )
        if state.rank_residual < RANK_RESIDUAL_TOL or step < cfg.eps_r:
            break

    phi = _phase_project(np.linalg.eigh(state.S)[1][:, -1])
    if phi_feasible(phi):
        return phi

    rng = rng_stream(cfg.seed, "sdr-phase")

    def scorer(cand):
        val = _true_min_g(ch, alloc, cand, cfg)
        return val if val >= chi - FEAS_TOL else -np.inf

    try:
        return gaussian_randomization(state.S, cfg.C, _phase_project, scorer, rng)
    except ExtractionError as exc:
        raise PhaseInfeasible(
            f"extraction found no reflection meeting chi={chi:.6g}"
        ) from exc


def max_chi_phase(
    ch: ChannelRealization,
    alloc: Allocation,
    cfg: SystemConfig,
    chi_lo: float,
    chi_hi: float,
    tol: float | None = None,
) -> tuple[np.ndarray, float]:
    """Drive the feasibility-seeking step with an outer bisection on chi.

    Returns the best reflection found and its true bottleneck value.
    chi_lo must be achievable (e.g. the current allocation's value).
    """
    tol = cfg.eps_r if tol is None else tol
    phi_best = np.asarray(alloc.phi, dtype=complex)
    best = _true_min_g(ch, alloc, phi_best, cfg)
    lo, hi = chi_lo, chi_hi
    while hi - lo > tol:
        mid = 0.5 * (hi + lo)
        try:
            phi = penalty_sca_phase(ch, alloc.replace(phi=phi_best), mid, cfg)
        except PhaseInfeasible:
            hi = mid
            continue
        achieved = _true_min_g(ch, alloc, phi, cfg)
        if achieved > best:
            phi_best, best = phi, achieved
        lo = max(mid, achieved)
    return phi_best, best
