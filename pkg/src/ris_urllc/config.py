"""Scenario configuration, unit conversions, and the shared decision-state types.

All quantities are stored in linear SI units (watts, meters, seconds).
dB / dBm values are converted exactly once, when a config is built or
loaded; nothing downstream ever sees a logarithmic unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

__all__ = [
    "ConfigError",
    "Rect",
    "SystemConfig",
    "Allocation",
    "dbm_to_watts",
    "db_to_linear",
    "make_config",
    "validate_config",
    "load_config",
    "blocklength_cap",
    "allocation_violations",
    "rng_stream",
]


class ConfigError(ValueError):
    """Raised when a configuration violates a documented invariant."""


def dbm_to_watts(x: float) -> float:
    """Convert a power from dBm to watts: 10^((x - 30) / 10)."""
    return 10.0 ** ((x - 30.0) / 10.0)


def db_to_linear(x: float) -> float:
    """Convert a dB ratio to a linear ratio: 10^(x / 10)."""
    return 10.0 ** (x / 10.0)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned user drop region at a fixed elevation, meters."""

    x_min: float = 90.0
    x_max: float = 190.0
    y_min: float = -10.0
    y_max: float = 10.0
    z: float = 0.0


def _default_D() -> tuple[int, ...]:
    return (32,) * 4


def _default_pmax() -> tuple[float, ...]:
    return (0.3,) * 4


@dataclass(frozen=True)
class SystemConfig:
    """Everything that defines one scenario: scene, radio, budgets, solver knobs.

    K users (even), an Nt-antenna receiver, and an N-element reflecting
    surface.  Direct user-receiver links are blocked; all signal energy
    arrives via the surface.
    """

    K: int = 4
    Nt: int = 3
    N: int = 32
    D: tuple[int, ...] = field(default_factory=_default_D)  # payload bits per user
    T: float = 20.0  # slot duration, s
    T_sym: float = 1.0  # symbol duration, s
    E0: float = 10.0  # shared transmit-energy budget, J
    p_max: tuple[float, ...] = field(default_factory=_default_pmax)  # W per user
    sigma2: float = 1e-14  # noise power at the receiver, W (-110 dBm)
    alpha1: float = 2.2  # path-loss exponent, BS-RIS link
    alpha2: float = 2.6  # path-loss exponent, RIS-user links
    K1: float = 10 ** 0.5  # Rician factor, BS-RIS link (linear; 5 dB)
    K2: float = 10 ** 0.5  # Rician factor, RIS-user links (linear; 5 dB)
    rho0: float = 1e-3  # reference path gain at 1 m (linear; -30 dB)
    bs_pos: tuple[float, float, float] = (0.0, 0.0, 10.0)
    ris_pos: tuple[float, float, float] = (5.0, 15.0, 10.0)
    user_region: Rect = field(default_factory=Rect)
    seed: int = 0
    # convergence tolerances
    eps_p: float = 1e-5  # power SCA, in the objective
    eps_b: float = 1e-3  # combiner bisection interval width
    eps_r: float = 1e-4  # reflection SCA iterate change
    eps_u: float = 1e-4  # pairing bisection interval width (continuous mode)
    ao_tol: float = 1e-4  # outer alternating-loop objective change
    # iteration caps
    Ip_max: int = 30
    Ib_max: int = 60
    Ir_max: int = 10
    Iu_max: int = 60
    I_max: int = 20
    C: int = 500  # randomization sample count for rank-one recovery
    # model switches
    conventional_interference: bool = False  # cross-combiner interference form
    pairing_continuous: bool = False  # epsilon-bisection instead of exact thresholds


def make_config(**kw) -> SystemConfig:
    """Build a validated SystemConfig, broadcasting scalar D / p_max over users.

    dB-valued keyword aliases (``sigma2_dbm``, ``K1_db``, ``K2_db``,
    ``rho0_db``) are converted to linear units here.
    """
    if "sigma2_dbm" in kw:
        kw["sigma2"] = dbm_to_watts(kw.pop("sigma2_dbm"))
    for db_key, lin_key in (("K1_db", "K1"), ("K2_db", "K2"), ("rho0_db", "rho0")):
        if db_key in kw:
            kw[lin_key] = db_to_linear(kw.pop(db_key))
    if "user_region" in kw and isinstance(kw["user_region"], dict):
        kw["user_region"] = Rect(**kw["user_region"])
    for key in ("bs_pos", "ris_pos"):
        if key in kw:
            kw[key] = tuple(float(v) for v in kw[key])
    K = int(kw.get("K", 4))
    kw["K"] = K
    for key, cast in (("D", int), ("p_max", float)):
        if key in kw:
            val = kw[key]
            if np.isscalar(val):
                kw[key] = (cast(val),) * K
            else:
                kw[key] = tuple(cast(v) for v in val)
        else:
            default = 32 if key == "D" else 0.3
            kw[key] = (cast(default),) * K
    return validate_config(SystemConfig(**kw))


def validate_config(cfg: SystemConfig) -> SystemConfig:
    """Check every config invariant; return cfg unchanged if all hold.

    Idempotent: a validated config validates to an identical value.
    """
    if cfg.K < 2 or cfg.K % 2 != 0:
        raise ConfigError(f"K must be even and >= 2, got K={cfg.K}")
    if cfg.Nt < 1:
        raise ConfigError(f"Nt must be >= 1, got Nt={cfg.Nt}")
    if cfg.N < 1:
        raise ConfigError(f"N must be >= 1, got N={cfg.N}")
    if len(cfg.D) != cfg.K:
        raise ConfigError(f"D must list {cfg.K} payloads, got {len(cfg.D)}")
    if any(d <= 0 or d != int(d) for d in cfg.D):
        raise ConfigError(f"D entries must be positive integers, got D={cfg.D}")
    if not (0 < cfg.T_sym <= cfg.T):
        raise ConfigError(
            f"slot shorter than one symbol: T={cfg.T}, T_sym={cfg.T_sym}"
        )
    if math.floor(cfg.T / cfg.T_sym) < 1:
        raise ConfigError("T/T_sym must admit at least one symbol")
    if cfg.E0 <= 0:
        raise ConfigError(f"E0 must be positive, got E0={cfg.E0}")
    if len(cfg.p_max) != cfg.K:
        raise ConfigError(f"p_max must list {cfg.K} caps, got {len(cfg.p_max)}")
    if any(p <= 0 for p in cfg.p_max):
        raise ConfigError(f"p_max entries must be positive, got p_max={cfg.p_max}")
    if cfg.sigma2 <= 0:
        raise ConfigError(f"sigma2 must be positive, got sigma2={cfg.sigma2}")
    if cfg.alpha1 < 2 or cfg.alpha2 < 2:
        raise ConfigError(
            f"path-loss exponents must be >= 2, got alpha1={cfg.alpha1}, alpha2={cfg.alpha2}"
        )
    if cfg.K1 < 0 or cfg.K2 < 0 or cfg.rho0 <= 0:
        raise ConfigError("K1, K2 must be >= 0 and rho0 > 0")
    for name in ("eps_p", "eps_b", "eps_r", "eps_u", "ao_tol"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"{name} must be positive, got {getattr(cfg, name)}")
    for name in ("Ip_max", "Ib_max", "Ir_max", "Iu_max", "I_max", "C"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be >= 1, got {getattr(cfg, name)}")
    r = cfg.user_region
    if r.x_min > r.x_max or r.y_min > r.y_max:
        raise ConfigError(f"user_region bounds are inverted: {r}")
    return cfg


def blocklength_cap(cfg: SystemConfig) -> int:
    """Largest symbol count fitting one slot: floor(T / T_sym)."""
    return int(math.floor(cfg.T / cfg.T_sym))


# ---------------------------------------------------------------------------
# decision state


@dataclass(frozen=True, eq=False)
class Allocation:
    """One joint decision: powers, combiners, reflection, blocklength, grouping.

    ``groups`` lists the users of each time slot in decode order: the
    first entry of a group is detected first (sees the rest as
    interference); the last is detected interference-free.  In the hybrid
    scheme every group is a (strong, weak) pair; a single group of all K
    users describes the fully non-orthogonal baseline.
    """

    p: np.ndarray  # (K,) transmit powers, W
    w: np.ndarray  # (K, Nt) complex unit-norm receive combiners
    phi: np.ndarray  # (N,) complex unit-modulus reflection coefficients
    m: float  # blocklength in symbols; real during relaxation
    groups: tuple[tuple[int, ...], ...]

    @property
    def pairing(self) -> dict[int, int] | None:
        """First->second user map when every group is a pair, else None."""
        if all(len(g) == 2 for g in self.groups):
            return {g[0]: g[1] for g in self.groups}
        return None

    @property
    def order(self) -> dict[int, int]:
        """Global decode positions, slot-major then in-group decode order."""
        pos = {}
        i = 0
        for g in self.groups:
            for k in g:
                pos[k] = i
                i += 1
        return pos

    def replace(self, **kw) -> "Allocation":
        return replace(self, **kw)


def allocation_violations(
    alloc: Allocation,
    cfg: SystemConfig,
    *,
    strong: tuple[int, ...] | None = None,
    weak: tuple[int, ...] | None = None,
    require_integer_m: bool = False,
    tol: float = 1e-7,
) -> list[str]:
    """Machine-check every hard constraint on an allocation.

    Returns a list of human-readable violations (empty when clean).  The
    same predicate backs every module's tests and the feasibility audit.
    """
    bad: list[str] = []
    K = cfg.K
    p = np.asarray(alloc.p, dtype=float)
    if p.shape != (K,):
        bad.append(f"p has shape {p.shape}, expected ({K},)")
        return bad
    if np.any(p <= 0):
        bad.append(f"non-positive power: min p = {p.min():.3e}")
    if np.any(p > np.asarray(cfg.p_max) + tol):
        bad.append(f"power box violated: {p} > {cfg.p_max}")
    w = np.asarray(alloc.w)
    if w.shape != (K, cfg.Nt):
        bad.append(f"w has shape {w.shape}, expected ({K}, {cfg.Nt})")
    else:
        norms = np.linalg.norm(w, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            bad.append(f"combiner norms off unit: {norms}")
    phi = np.asarray(alloc.phi)
    if phi.shape != (cfg.N,):
        bad.append(f"phi has shape {phi.shape}, expected ({cfg.N},)")
    elif np.any(np.abs(np.abs(phi) - 1.0) > 1e-9):
        bad.append(f"reflection moduli off unit: {np.abs(phi)}")
    cap = blocklength_cap(cfg)
    if not (1 - 1e-12 <= alloc.m <= cap + 1e-12):
        bad.append(f"blocklength m={alloc.m} outside [1, {cap}]")
    if require_integer_m and alloc.m != int(alloc.m):
        bad.append(f"blocklength m={alloc.m} is not integral")
    members = [k for g in alloc.groups for k in g]
    if sorted(members) != list(range(K)):
        bad.append(f"groups {alloc.groups} do not partition users 0..{K - 1}")
    if strong is not None and weak is not None:
        pairing = alloc.pairing
        if pairing is None:
            bad.append("strong/weak pairing requested but groups are not pairs")
        else:
            if sorted(pairing) != sorted(strong):
                bad.append(f"pair leads {sorted(pairing)} != strong set {sorted(strong)}")
            if sorted(pairing.values()) != sorted(weak):
                bad.append(
                    f"pair tails {sorted(pairing.values())} != weak set {sorted(weak)}"
                )
    energy = cfg.T_sym * alloc.m * float(p.sum())
    if energy > cfg.E0 + 1e-12 + tol * cfg.E0:
        bad.append(f"energy budget violated: {energy:.6e} > {cfg.E0}")
    return bad


# ---------------------------------------------------------------------------
# deterministic stream derivation


def rng_stream(seed: int, *tags) -> np.random.Generator:
    """Derive an independent generator from a root seed and a purpose key.

    Streams for distinct tag tuples never overlap, so adding users (or
    purposes) leaves existing draws untouched.
    """
    words = [int(seed) & 0xFFFFFFFF]
    for t in tags:
        if isinstance(t, str):
            words.append(int.from_bytes(t.encode()[:8].ljust(8, b"\0"), "little") & 0xFFFFFFFF)
        else:
            words.append(int(t) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(words))


# ---------------------------------------------------------------------------
# config file loader (documented schema: see configs/default.toml)

_SCHEMA: dict[str, dict[str, str]] = {
    "users": {"K": "K", "D": "D"},
    "bs": {"antennas": "Nt", "pos": "bs_pos"},
    "ris": {"elements": "N", "pos": "ris_pos"},
    "region": {"x_min": "", "x_max": "", "y_min": "", "y_max": "", "z": ""},
    "radio": {
        "sigma2_dbm": "sigma2_dbm",
        "alpha_bs_ris": "alpha1",
        "alpha_ris_user": "alpha2",
        "rician_bs_ris_db": "K1_db",
        "rician_ris_user_db": "K2_db",
        "rho0_db": "rho0_db",
    },
    "power": {"p_max_w": "p_max", "energy_budget_j": "E0"},
    "timing": {"slot_s": "T", "symbol_s": "T_sym"},
    "solver": {
        "eps_power": "eps_p",
        "eps_beam": "eps_b",
        "eps_reflection": "eps_r",
        "eps_pairing": "eps_u",
        "ao_tol": "ao_tol",
        "max_iter_power": "Ip_max",
        "max_iter_beam": "Ib_max",
        "max_iter_reflection": "Ir_max",
        "max_iter_pairing": "Iu_max",
        "max_iter_ao": "I_max",
        "randomization_samples": "C",
        "conventional_interference": "conventional_interference",
        "pairing_continuous": "pairing_continuous",
    },
    "run": {"seed": "seed"},
}


def load_config(path) -> SystemConfig:
    """Load a TOML scenario file, rejecting any key outside the schema."""
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib

    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    kw: dict = {}
    region: dict = {}
    for section, entries in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(entries, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        for key, value in entries.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key {key!r} in section [{section}]")
            if section == "region":
                region[key] = float(value)
            else:
                kw[_SCHEMA[section][key]] = value
    if region:
        kw["user_region"] = Rect(**{**Rect().__dict__, **region})
    return make_config(**kw)


def config_overrides(cfg: SystemConfig, **kw) -> SystemConfig:
    """Return a validated copy of cfg with the given fields replaced.

    Changing K rebroadcasts uniform per-user vectors to the new count.
    """
    base = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    base.update(kw)
    if "K" in kw:
        K = int(kw["K"])
        for key in ("D", "p_max"):
            if key not in kw:
                vals = base[key]
                if len(set(vals)) == 1:
                    base[key] = (vals[0],) * K
    for key, cast in (("D", int), ("p_max", float)):
        if key in kw and np.isscalar(kw[key]):
            base[key] = (cast(kw[key]),) * base["K"]
    return validate_config(SystemConfig(**base))
