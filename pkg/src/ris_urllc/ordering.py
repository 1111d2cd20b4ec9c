"""Detection-order design: reflection-summed channel-gain maximization,
strong/weak user classification, and the per-user decode ranks.

The reflection that maximizes the total combined channel gain
sum_k ||H^H diag(phi) f_k||^2 is found by lifting phi to S = phi phi^H,
solving the relaxed program  max tr((sum_k R_k) S), [S]_nn = 1, S PSD,
and recovering a unit-modulus vector by scored randomization.  Users are
then ranked by their combined gain under that reflection: the top half
are "strong" (decoded first within their slot), the rest "weak".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelRealization
from .config import SystemConfig, rng_stream
from .conic import ConeProgram, gaussian_randomization, solve_sdp
from .metrics import combined_channel

__all__ = ["OrderResult", "build_gain_matrices", "gains_under", "determine_order"]


@dataclass(frozen=True, eq=False)
class OrderResult:
    """Initial reflection, per-user gains, classification, decode ranks."""

    phi0: np.ndarray  # (N,) unit-modulus reflection
    gains: np.ndarray  # (K,) combined gains ||H^H diag(phi0) f_k||^2
    strong: tuple[int, ...]
    weak: tuple[int, ...]
    pi: dict[int, int]  # user -> decode rank (0 = first decoded)


def build_gain_matrices(ch: ChannelRealization) -> list[np.ndarray]:
    """Per-user N x N Hermitian R_k with phi^H R_k phi = ||H^H diag(phi) f_k||^2.

    R_k = diag(f_k)^H H H^H diag(f_k), from diag(phi) f_k = diag(f_k) phi.
    """
    HHh = ch.H @ ch.H.conj().T
    out = []
    for f_k in ch.f:
        Dk = np.diag(f_k)
        Rk = Dk.conj().T @ HHh @ Dk
        out.append(0.5 * (Rk + Rk.conj().T))
    return out


def gains_under(ch: ChannelRealization, phi: np.ndarray) -> np.ndarray:
    """Combined channel gains ||H^H diag(phi) f_k||^2 for each user."""
    return np.array(
        [float(np.linalg.norm(combined_channel(ch.H, phi, f_k)) ** 2) for f_k in ch.f]
    )


def classify(gains: np.ndarray) -> tuple[tuple[int, ...], tuple[int, ...], dict[int, int]]:
    """Rank users by descending gain (index breaks ties); split in half."""
    K = len(gains)
    ranked = sorted(range(K), key=lambda k: (-gains[k], k))
    pi = {k: rank for rank, k in enumerate(ranked)}
    strong = tuple(sorted(ranked[: K // 2]))
    weak = tuple(sorted(ranked[K // 2 :]))
    return strong, weak, pi


def determine_order(ch: ChannelRealization, cfg: SystemConfig) -> OrderResult:
    """Solve the lifted gain-maximization, extract phi0, classify users.

    The relaxation value is asserted to upper-bound the extracted
    reflection's summed gain (up to solver tolerance) on every call.
    """
    R = build_gain_matrices(ch)
    R_sum = sum(R)
    scale = max(np.abs(R_sum).max(), 1e-300)
    prog = ConeProgram(
        blocks=(cfg.N,),
        objective={0: R_sum / scale},
        constraints=(),
        diag_one=True,
    )
    res = solve_sdp(prog)
    if res.status != "optimal":
        raise RuntimeError(f"gain-maximization SDP failed: {res.status} {res.detail}")
    S = res.X[0]

    def summed_gain(phi):
        return float(np.real(phi.conj() @ R_sum @ phi))

    def projector(v):
        v = np.asarray(v, dtype=complex).ravel()
        mod = np.abs(v)
        out = np.where(mod > 0, v / np.where(mod > 0, mod, 1.0), 1.0 + 0.0j)
        return out

    rng = rng_stream(cfg.seed, "sdr-order")
    phi0 = gaussian_randomization(S, cfg.C, projector, summed_gain, rng)

    sdr_value = res.value * scale
    extracted = summed_gain(phi0)
    if extracted > sdr_value * (1.0 + 1e-6) + 1e-9 * scale:
        raise RuntimeError(
            f"relaxation bound violated: extracted {extracted:.6e} > SDR {sdr_value:.6e}"
        )

    gains = gains_under(ch, phi0)
    strong, weak, pi = classify(gains)
    return OrderResult(phi0=phi0, gains=gains, strong=strong, weak=weak, pi=pi)
