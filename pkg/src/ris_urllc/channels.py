"""Scene geometry and Rician-faded channel realizations.

The receiver-to-surface matrix H (N x Nt) and the per-user surface-to-user
vectors f_k (N,) are drawn as

    sqrt(rho0 / d^alpha) * ( sqrt(Kf/(1+Kf)) * LOS + sqrt(1/(1+Kf)) * NLOS )

where the LOS part is a deterministic unit-modulus outer product of
uniform-linear-array steering vectors fixed by the geometry, and the NLOS
entries are i.i.d. circularly-symmetric complex normal with unit variance.
Both arrays are modeled as half-wavelength ULAs along the x axis, so a
steering entry toward a point at direction cosine u is exp(j*pi*n*u).

Direct user-receiver links are blocked and therefore exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig, rng_stream

__all__ = [
    "ChannelRealization",
    "place_users",
    "path_gain",
    "steering_vector",
    "realize_channels",
    "dump_channels",
    "load_channels",
]


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of the propagation state for a scenario."""

    H: np.ndarray  # (N, Nt) complex, surface -> receiver side
    f: tuple[np.ndarray, ...]  # K vectors (N,) complex, surface -> user side
    user_pos: np.ndarray  # (K, 3) meters
    d0: float  # receiver-surface distance, m
    d: np.ndarray  # (K,) surface-user distances, m

    def validate(self, cfg: SystemConfig) -> "ChannelRealization":
        if self.H.shape != (cfg.N, cfg.Nt):
            raise ValueError(f"H shape {self.H.shape} != ({cfg.N}, {cfg.Nt})")
        if len(self.f) != cfg.K or any(fk.shape != (cfg.N,) for fk in self.f):
            raise ValueError("f vectors inconsistent with config")
        if not np.isfinite(self.H).all() or not all(np.isfinite(fk).all() for fk in self.f):
            raise ValueError("non-finite channel entries")
        if self.d0 <= 0 or np.any(self.d <= 0):
            raise ValueError("non-positive link distance")
        return self


def place_users(cfg: SystemConfig, seed: int | None = None) -> np.ndarray:
    """Drop K users uniformly in the configured rectangle at its elevation.

    Each user has its own derived stream, so growing K never moves the
    users already placed.  A rectangle collapsed to a point is fine (all
    users land on it); inverted bounds are rejected at config validation.
    """
    seed = cfg.seed if seed is None else seed
    r = cfg.user_region
    pos = np.empty((cfg.K, 3))
    for k in range(cfg.K):
        rng = rng_stream(seed, "place", k)
        pos[k, 0] = rng.uniform(r.x_min, r.x_max) if r.x_max > r.x_min else r.x_min
        pos[k, 1] = rng.uniform(r.y_min, r.y_max) if r.y_max > r.y_min else r.y_min
        pos[k, 2] = r.z
    return pos


def path_gain(d: float, alpha: float, rho0: float) -> float:
    """Power-domain large-scale gain rho0 / d^alpha at distance d meters."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return rho0 / d ** alpha


def steering_vector(n_elem: int, u: float) -> np.ndarray:
    """Half-wavelength ULA response toward direction cosine u."""
    return np.exp(1j * np.pi * np.arange(n_elem) * u)


def _direction_cosine(src: np.ndarray, dst: np.ndarray) -> float:
    # arrays lie along x; cosine of the angle between x-hat and the link
    diff = dst - src
    return float(diff[0] / np.linalg.norm(diff))


def realize_channels(
    cfg: SystemConfig,
    seed: int | None = None,
    user_pos: np.ndarray | None = None,
) -> ChannelRealization:
    """Draw one channel state; bit-identical for equal (cfg, seed).

    ``user_pos`` overrides placement (used to hold one drop fixed across a
    parameter sweep).
    """
    seed = cfg.seed if seed is None else seed
    if user_pos is None:
        user_pos = place_users(cfg, seed)
    user_pos = np.asarray(user_pos, dtype=float)
    bs = np.asarray(cfg.bs_pos, dtype=float)
    ris = np.asarray(cfg.ris_pos, dtype=float)
    d0 = float(np.linalg.norm(bs - ris))

    a_ris_bs = steering_vector(cfg.N, _direction_cosine(ris, bs))
    a_bs_ris = steering_vector(cfg.Nt, _direction_cosine(bs, ris))
    H_los = np.outer(a_ris_bs, a_bs_ris.conj())
    rng_h = rng_stream(seed, "H")
    H_nlos = (
        rng_h.standard_normal((cfg.N, cfg.Nt)) + 1j * rng_h.standard_normal((cfg.N, cfg.Nt))
    ) / np.sqrt(2.0)
    amp0 = np.sqrt(path_gain(d0, cfg.alpha1, cfg.rho0))
    H = amp0 * (
        np.sqrt(cfg.K1 / (1.0 + cfg.K1)) * H_los + np.sqrt(1.0 / (1.0 + cfg.K1)) * H_nlos
    )

    d = np.linalg.norm(user_pos - ris, axis=1)
    f = []
    for k in range(cfg.K):
        f_los = steering_vector(cfg.N, _direction_cosine(ris, user_pos[k]))
        rng_f = rng_stream(seed, "f", k)
        f_nlos = (
            rng_f.standard_normal(cfg.N) + 1j * rng_f.standard_normal(cfg.N)
        ) / np.sqrt(2.0)
        amp = np.sqrt(path_gain(float(d[k]), cfg.alpha2, cfg.rho0))
        f.append(
            amp
            * (
                np.sqrt(cfg.K2 / (1.0 + cfg.K2)) * f_los
                + np.sqrt(1.0 / (1.0 + cfg.K2)) * f_nlos
            )
        )
    return ChannelRealization(H=H, f=tuple(f), user_pos=user_pos, d0=d0, d=d).validate(cfg)


# ---------------------------------------------------------------------------
# plain-text dump for oracle replays
#
# Format: one header line "ris-channel-dump v1 N Nt K", one line "d0 <val>",
# one line per user "user k x y z d", then labeled complex blocks "H" and
# "f k" listing entries row-major as "<re> <im>" pairs, one per line.


def dump_channels(ch: ChannelRealization, path) -> None:
    N, Nt = ch.H.shape
    K = len(ch.f)
    lines = [f"ris-channel-dump v1 {N} {Nt} {K}", f"d0 {float(ch.d0)!r}"]
    for k in range(K):
        x, y, z = (float(v) for v in ch.user_pos[k])
        lines.append(f"user {k} {x!r} {y!r} {z!r} {float(ch.d[k])!r}")
    lines.append("H")
    for v in ch.H.ravel():
        lines.append(f"{float(v.real)!r} {float(v.imag)!r}")
    for k in range(K):
        lines.append(f"f {k}")
        for v in ch.f[k]:
            lines.append(f"{float(v.real)!r} {float(v.imag)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_channels(path) -> ChannelRealization:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    head = lines[0].split()
    if head[:2] != ["ris-channel-dump", "v1"]:
        raise ValueError(f"unrecognized channel dump header: {lines[0]!r}")
    N, Nt, K = (int(v) for v in head[2:5])
    d0 = float(lines[1].split()[1])
    pos = np.empty((K, 3))
    d = np.empty(K)
    idx = 2
    for _ in range(K):
        parts = lines[idx].split()
        k = int(parts[1])
        pos[k] = [float(parts[2]), float(parts[3]), float(parts[4])]
        d[k] = float(parts[5])
        idx += 1
    if lines[idx] != "H":
        raise ValueError("expected H block")
    idx += 1
    flat = []
    for _ in range(N * Nt):
        re, im = lines[idx].split()
        flat.append(complex(float(re), float(im)))
        idx += 1
    H = np.array(flat, dtype=complex).reshape(N, Nt)
    f = [None] * K
    for _ in range(K):
        parts = lines[idx].split()
        if parts[0] != "f":
            raise ValueError("expected f block")
        k = int(parts[1])
        idx += 1
        vec = []
        for _ in range(N):
            re, im = lines[idx].split()
            vec.append(complex(float(re), float(im)))
            idx += 1
        f[k] = np.array(vec, dtype=complex)
    return ChannelRealization(H=H, f=tuple(f), user_pos=pos, d0=d0, d=d)
