"""Combined channels, SIC SINRs, finite-blocklength reliability metrics.

For blocklength m symbols (codewords span m = M^2 channel uses) and payload
D bits, the decoding-error probability of a user at SINR gamma is

    eps = Q(g),    g = sqrt(m) * ln2 / V * (log2(1 + gamma) - D / m),

the normal-approximation tail of short-packet coding.  The dispersion
factor V is taken as 1 inside every optimization routine (the bounds used
there require it); the exact V = sqrt(1 - (1+gamma)^-2) is available for
reporting only, floored at 1e-6 near gamma = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .config import Allocation, SystemConfig, blocklength_cap
from .channels import ChannelRealization

__all__ = [
    "MetricsReport",
    "combined_channel",
    "effective_gains",
    "sinr_all",
    "g_values",
    "q_function",
    "q_inverse",
    "min_g",
    "report",
]

V_FLOOR = 1e-6
LN2 = float(np.log(2.0))


def combined_channel(H: np.ndarray, phi: np.ndarray, f_k: np.ndarray) -> np.ndarray:
    """Receiver-side channel of one user through the surface: H^H diag(phi) f_k."""
    H = np.asarray(H)
    phi = np.asarray(phi).ravel()
    f_k = np.asarray(f_k).ravel()
    if H.shape[0] != phi.shape[0] or phi.shape[0] != f_k.shape[0]:
        raise ValueError(
            f"dimension mismatch: H {H.shape}, phi {phi.shape}, f {f_k.shape}"
        )
    return H.conj().T @ (phi * f_k)


def q_function(x):
    """Standard normal tail probability Q(x) = erfc(x / sqrt(2)) / 2."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def q_inverse(eps):
    """Exact inverse of q_function on (0, 1)."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0.0) or np.any(eps >= 1.0):
        raise ValueError(f"q_inverse argument must lie in (0, 1), got {eps}")
    return np.sqrt(2.0) * special.erfcinv(2.0 * eps)


def effective_gains(
    ch: ChannelRealization, alloc: Allocation, cfg: SystemConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per-user signal gains X_k = |w_k^H q_k|^2 and interference gain matrix.

    Entry [k, j] of the matrix is the gain the signal of later-decoded
    group-mate j contributes to the detection of user k: |w_j^H q_j|^2 as
    printed in the source SINR expressions, or the cross form
    |w_k^H q_j|^2 when ``cfg.conventional_interference`` is set.  Entries
    outside a group (or not later in decode order) are zero.
    """
    K = cfg.K
    q = [combined_channel(ch.H, alloc.phi, ch.f[k]) for k in range(K)]
    w = np.asarray(alloc.w)
    X = np.array([np.abs(np.vdot(w[k], q[k])) ** 2 for k in range(K)])
    G = np.zeros((K, K))
    for g in alloc.groups:
        for i, k in enumerate(g):
            for j in g[i + 1 :]:
                if cfg.conventional_interference:
                    G[k, j] = np.abs(np.vdot(w[k], q[j])) ** 2
                else:
                    G[k, j] = np.abs(np.vdot(w[j], q[j])) ** 2
    return X, G


def sinr_all(ch: ChannelRealization, alloc: Allocation, cfg: SystemConfig) -> np.ndarray:
    """Detection SINR of every user under the allocation's SIC structure.

    Within a group, the user decoded at position i sees the powers of
    positions i+1.. as interference; the last user of each group is
    interference-free.
    """
    X, G = effective_gains(ch, alloc, cfg)
    p = np.asarray(alloc.p, dtype=float)
    interference = G @ p
    return X * p / (interference + cfg.sigma2)


def g_values(gamma, m: float, D, exact_V: bool = False) -> np.ndarray:
    """Q-function arguments from SINRs at blocklength m and payloads D bits.

    With V = 1 this is sqrt(m) * (ln(1 + gamma) - ln2 * D / m); finite at
    gamma = 0 (value -ln2 * D / sqrt(m)).
    """
    gamma = np.asarray(gamma, dtype=float)
    D = np.broadcast_to(np.asarray(D, dtype=float), gamma.shape)
    if m < 1:
        raise ValueError(f"blocklength must be >= 1 symbol, got m={m}")
    root_m = np.sqrt(m)
    core = root_m * (np.log1p(gamma) - LN2 * D / m)
    if not exact_V:
        return core
    V = np.maximum(np.sqrt(np.maximum(1.0 - (1.0 + gamma) ** -2, 0.0)), V_FLOOR)
    return core / V


def min_g(ch: ChannelRealization, alloc: Allocation, cfg: SystemConfig) -> float:
    """Bottleneck reliability exponent min_k g_k at V = 1 (the objective)."""
    gamma = sinr_all(ch, alloc, cfg)
    return float(np.min(g_values(gamma, alloc.m, cfg.D)))


@dataclass(frozen=True, eq=False)
class MetricsReport:
    """Per-user and scenario-level reliability/energy summary."""

    gamma: np.ndarray  # (K,) linear SINRs
    rate: np.ndarray  # (K,) operational coding rates D_k / m, bits/s/Hz
    g: np.ndarray  # (K,) Q-function arguments
    eps: np.ndarray  # (K,) decoding-error probabilities
    energy_total: float  # J
    chi: float  # min_k g_k
    worst_eps: float  # max_k eps_k = Q(chi)
    m: float  # blocklength used
    latency_ok: bool  # m within the slot's symbol budget

    def to_dict(self) -> dict:
        """Flat JSON-ready record."""
        return {
            "gamma": [float(v) for v in self.gamma],
            "rate": [float(v) for v in self.rate],
            "g": [float(v) for v in self.g],
            "eps": [float(v) for v in self.eps],
            "energy_total_j": float(self.energy_total),
            "chi": float(self.chi),
            "worst_eps": float(self.worst_eps),
            "m": float(self.m),
            "latency_ok": bool(self.latency_ok),
        }


def report(
    ch: ChannelRealization,
    alloc: Allocation,
    cfg: SystemConfig,
    exact_V: bool = False,
) -> MetricsReport:
    """Evaluate an allocation: SINRs, rates, error probabilities, energy."""
    gamma = sinr_all(ch, alloc, cfg)
    g = g_values(gamma, alloc.m, cfg.D, exact_V=exact_V)
    eps = q_function(g)
    chi = float(np.min(g))
    energy = float(cfg.T_sym * alloc.m * np.sum(alloc.p))
    return MetricsReport(
        gamma=gamma,
        rate=np.asarray(cfg.D, dtype=float) / alloc.m,
        g=g,
        eps=eps,
        energy_total=energy,
        chi=chi,
        worst_eps=float(q_function(chi)),
        m=float(alloc.m),
        latency_ok=bool(alloc.m <= blocklength_cap(cfg) + 1e-12),
    )
