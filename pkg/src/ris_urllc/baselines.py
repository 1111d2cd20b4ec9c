"""Comparison schemes: the full pipeline with one component disabled or
replaced, so every gap in the results isolates one design choice.

  proposed        full three-step pipeline
  random_phase    reflection drawn uniform unit-modulus and frozen
  pure_noma       all users in one slot under a full detection chain
  random_pairing  three-step with the re-pairing step skipped
  location_sic    strong/weak split by surface-user distance, not gain
  equal_power     identical powers at the budget share, power step skipped

Every scheme's output satisfies the same hard constraints; only what gets
optimized differs.
"""

from __future__ import annotations

import numpy as np

from .channels import ChannelRealization, realize_channels
from .config import SystemConfig, blocklength_cap, rng_stream, validate_config
from .ordering import OrderResult, classify, determine_order, gains_under
from .pipeline import (
    initial_allocation,
    random_pairing_groups,
    run_pipeline,
    run_three_step,
)

__all__ = ["SCHEMES", "run_scheme"]

SCHEMES = (
    "proposed",
    "random_phase",
    "pure_noma",
    "random_pairing",
    "location_sic",
    "equal_power",
)


def _distance_order(ch: ChannelRealization, phi0: np.ndarray) -> OrderResult:
    """Classification by surface-user proximity: nearest half decodes first."""
    K = len(ch.f)
    ranked = sorted(range(K), key=lambda k: (ch.d[k], k))
    pi = {k: rank for rank, k in enumerate(ranked)}
    strong = tuple(sorted(ranked[: K // 2]))
    weak = tuple(sorted(ranked[K // 2 :]))
    return OrderResult(
        phi0=phi0, gains=gains_under(ch, phi0), strong=strong, weak=weak, pi=pi
    )


def run_scheme(
    scheme: str,
    cfg: SystemConfig,
    ch: ChannelRealization | None = None,
    with_trace: bool = False,
):
    """Run one scheme; returns (Allocation, MetricsReport), plus the
    RunTrace when ``with_trace`` is set."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    validate_config(cfg)
    if ch is None:
        ch = realize_channels(cfg)

    if scheme == "proposed":
        alloc, rep, trace = run_three_step(cfg, ch)

    elif scheme == "random_phase":
        rng = rng_stream(cfg.seed, "random-phase")
        phi = np.exp(2j * np.pi * rng.uniform(size=cfg.N))
        gains = gains_under(ch, phi)
        strong, weak, pi = classify(gains)
        order = OrderResult(phi0=phi, gains=gains, strong=strong, weak=weak, pi=pi)
        groups = random_pairing_groups(order, cfg)
        alloc, rep, trace = run_pipeline(
            cfg, ch, order, groups, disable=frozenset({"reflection"})
        )

    elif scheme == "pure_noma":
        order = determine_order(ch, cfg)
        chain = tuple(sorted(range(cfg.K), key=lambda k: order.pi[k]))
        alloc, rep, trace = run_pipeline(
            cfg, ch, order, (chain,), do_pairing=False
        )

    elif scheme == "random_pairing":
        order = determine_order(ch, cfg)
        groups = random_pairing_groups(order, cfg)
        alloc, rep, trace = run_pipeline(cfg, ch, order, groups, do_pairing=False)

    elif scheme == "location_sic":
        order = _distance_order(ch, determine_order(ch, cfg).phi0)
        groups = random_pairing_groups(order, cfg)
        alloc, rep, trace = run_pipeline(cfg, ch, order, groups)

    else:  # equal_power
        order = determine_order(ch, cfg)
        groups = random_pairing_groups(order, cfg)
        m0 = float(blocklength_cap(cfg))
        share = cfg.E0 / (cfg.T_sym * m0 * cfg.K)
        p_eq = np.minimum(np.asarray(cfg.p_max, dtype=float), share)
        alloc0 = initial_allocation(ch, order.phi0, groups, cfg).replace(p=p_eq)
        alloc, rep, trace = run_pipeline(
            cfg, ch, order, groups, disable=frozenset({"power"}), alloc0=alloc0
        )

    if with_trace:
        return alloc, rep, trace
    return alloc, rep
