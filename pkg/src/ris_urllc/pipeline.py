"""Three-step driver: detection-order design with a random initial pairing,
block-coordinate resource optimization, then optimal re-pairing.

Step 2 alternates power -> combiners -> reflection -> blocklength.  Each
block either improves the true bottleneck exponent or leaves the incumbent
untouched, so the recorded chi sequence is non-decreasing by construction;
the loop stops when one full round moves chi by at most ``ao_tol``.  The
relaxed blocklength is integerized once, after convergence.

Step 3 re-pairs strong and weak users by bottleneck matching at the
step-2 resources; the result can never have a smaller bottleneck than the
random pairing it replaces (the random matching is one of the candidates).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .beams import optimize_w
from .blocklength import greedy_round, optimize_blocklength
from .channels import ChannelRealization, realize_channels
from .config import Allocation, SystemConfig, blocklength_cap, rng_stream, validate_config
from .metrics import MetricsReport, combined_channel, min_g, report, sinr_all
from .ordering import OrderResult, determine_order
from .pairing import bottleneck_pairing, pair_weights
from .power import PowerIterate, cache_gains, sca_power, tight_lambda
from .reflection import PhaseInfeasible, penalty_sca_phase

__all__ = [
    "RunTrace",
    "random_pairing_groups",
    "initial_allocation",
    "ao_inner_loop",
    "run_three_step",
]

_CHI_SLACK = 1e-12  # a step must not lose more than this to be accepted


@dataclass(frozen=True, eq=False)
class RunTrace:
    """Objective trajectory and outcome of one optimization run."""

    chi: tuple[float, ...]  # bottleneck exponent after each full round
    step_seconds: dict[str, float]
    alloc: Allocation
    report: MetricsReport
    termination: str  # converged | iteration_cap | infeasible_step
    chi_pairing: float | None = None  # step-3 bottleneck, when it ran

    def to_dict(self) -> dict:
        return {
            "chi_trace": [float(v) for v in self.chi],
            "step_seconds": {k: float(v) for k, v in self.step_seconds.items()},
            "termination": self.termination,
            "chi_pairing": None if self.chi_pairing is None else float(self.chi_pairing),
            "report": self.report.to_dict(),
            "groups": [list(g) for g in self.alloc.groups],
            "m": float(self.alloc.m),
            "p": [float(v) for v in self.alloc.p],
        }


def random_pairing_groups(
    order: OrderResult, cfg: SystemConfig, seed: int | None = None
) -> tuple[tuple[int, ...], ...]:
    """Match each strong user to a uniformly drawn weak partner."""
    rng = rng_stream(cfg.seed if seed is None else seed, "pairing")
    weak = list(order.weak)
    perm = rng.permutation(len(weak))
    return tuple((s, weak[perm[i]]) for i, s in enumerate(sorted(order.strong)))


def initial_allocation(
    ch: ChannelRealization,
    phi0: np.ndarray,
    groups: tuple[tuple[int, ...], ...],
    cfg: SystemConfig,
) -> Allocation:
    """Feasible starting point: 0.9 budget-share powers, matched-filter
    combiners, the step-1 reflection, and the full-slot blocklength."""
    m0 = float(blocklength_cap(cfg))
    share = 0.9 * cfg.E0 / (cfg.T_sym * m0 * cfg.K)
    p0 = np.minimum(np.asarray(cfg.p_max, dtype=float), share)
    w0 = np.empty((cfg.K, cfg.Nt), dtype=complex)
    for k in range(cfg.K):
        q = combined_channel(ch.H, phi0, ch.f[k])
        nq = np.linalg.norm(q)
        w0[k] = q / nq if nq > 0 else np.eye(cfg.Nt)[0]
    return Allocation(p=p0, w=w0, phi=np.asarray(phi0, dtype=complex), m=m0, groups=groups)


def ao_inner_loop(
    ch: ChannelRealization,
    order: OrderResult,
    groups: tuple[tuple[int, ...], ...],
    cfg: SystemConfig,
    disable: frozenset[str] = frozenset(),
    alloc0: Allocation | None = None,
) -> tuple[Allocation, tuple[float, ...], dict[str, float], str]:
    """Alternate the four resource blocks until chi stalls.

    ``disable`` names blocks to freeze ("power", "beam", "reflection",
    "blocklength") for the comparison schemes.  Returns the allocation
    with the blocklength already integerized, the per-round chi trace,
    accumulated per-step seconds, and the termination reason.
    """
    alloc = alloc0 if alloc0 is not None else initial_allocation(ch, order.phi0, groups, cfg)
    chi_cur = min_g(ch, alloc, cfg)
    trace: list[float] = []
    seconds = {"power": 0.0, "beam": 0.0, "reflection": 0.0, "blocklength": 0.0}
    termination = "iteration_cap"

    for _ in range(cfg.I_max):
        chi_round_start = chi_cur

        if "power" not in disable:
            t0 = time.perf_counter()
            try:
                gains = cache_gains(ch, alloc, cfg)
                init = PowerIterate(
                    p=np.asarray(alloc.p, dtype=float),
                    gamma=sinr_all(ch, alloc, cfg),
                    lam=tight_lambda(np.asarray(alloc.p, float), gains, cfg.sigma2),
                    chi=chi_cur,
                )
                iterate, _ = sca_power(gains, alloc, cfg, init=init)
            except ValueError:
                termination = "infeasible_step"
                break
            finally:
                seconds["power"] += time.perf_counter() - t0
            cand = alloc.replace(p=iterate.p)
            chi_cand = min_g(ch, cand, cfg)
            if chi_cand >= chi_cur - _CHI_SLACK:
                alloc, chi_cur = cand, max(chi_cand, chi_cur)

        if "beam" not in disable:
            t0 = time.perf_counter()
            w_new, chi_b, _ = optimize_w(ch, alloc, chi_cur, cfg)
            seconds["beam"] += time.perf_counter() - t0
            if chi_b >= chi_cur - _CHI_SLACK:
                alloc, chi_cur = alloc.replace(w=w_new), max(chi_b, chi_cur)

        if "reflection" not in disable:
            t0 = time.perf_counter()
            try:
                phi_new = penalty_sca_phase(ch, alloc, chi_cur, cfg)
                cand = alloc.replace(phi=phi_new)
                chi_cand = min_g(ch, cand, cfg)
                if chi_cand >= chi_cur - _CHI_SLACK:
                    alloc, chi_cur = cand, max(chi_cand, chi_cur)
            except PhaseInfeasible:
                pass  # keep the incumbent reflection
            finally:
                seconds["reflection"] += time.perf_counter() - t0

        if "blocklength" not in disable:
            t0 = time.perf_counter()
            gamma = sinr_all(ch, alloc, cfg)
            if np.all(gamma > 0):
                m_new, chi_m = optimize_blocklength(gamma, np.asarray(alloc.p, float), cfg)
                if chi_m >= chi_cur - _CHI_SLACK:
                    alloc, chi_cur = alloc.replace(m=m_new), max(chi_m, chi_cur)
            seconds["blocklength"] += time.perf_counter() - t0

        trace.append(chi_cur)
        if abs(chi_cur - chi_round_start) <= cfg.ao_tol:
            termination = "converged"
            break

    gamma = sinr_all(ch, alloc, cfg)
    m_int = greedy_round(float(alloc.m), np.asarray(alloc.p, float), gamma, cfg)
    alloc = alloc.replace(m=float(m_int))
    return alloc, tuple(trace), seconds, termination


def run_pipeline(
    cfg: SystemConfig,
    ch: ChannelRealization,
    order: OrderResult,
    groups: tuple[tuple[int, ...], ...],
    disable: frozenset[str] = frozenset(),
    do_pairing: bool = True,
    alloc0: Allocation | None = None,
) -> tuple[Allocation, MetricsReport, RunTrace]:
    """Steps 2 and 3 on prepared ordering/grouping inputs."""
    alloc, chi_trace, seconds, termination = ao_inner_loop(
        ch, order, groups, cfg, disable=disable, alloc0=alloc0
    )

    chi_match = None
    if do_pairing:
        t0 = time.perf_counter()
        weights = pair_weights(ch, alloc, order.strong, order.weak, cfg)
        mapping, chi_match = bottleneck_pairing(weights, cfg)
        seconds["pairing"] = time.perf_counter() - t0

        # re-pairing can never fall below the random matching it replaces
        rows = {s: i for i, s in enumerate(weights.strong)}
        cols = {w: j for j, w in enumerate(weights.weak)}
        chi_random = min(weights.e[rows[s], cols[w]] for s, w in alloc.groups)
        if chi_match < chi_random - 1e-12:
            raise RuntimeError(
                f"pairing dominance violated: {chi_match:.6e} < {chi_random:.6e}"
            )
        alloc = alloc.replace(groups=tuple((s, mapping[s]) for s in sorted(mapping)))

    rep = report(ch, alloc, cfg)
    trace = RunTrace(
        chi=chi_trace,
        step_seconds=seconds,
        alloc=alloc,
        report=rep,
        termination=termination,
        chi_pairing=chi_match,
    )
    return alloc, rep, trace


def run_three_step(
    cfg: SystemConfig, ch: ChannelRealization | None = None
) -> tuple[Allocation, MetricsReport, RunTrace]:
    """Full pipeline on one channel draw; deterministic for (cfg, seed)."""
    validate_config(cfg)
    if ch is None:
        ch = realize_channels(cfg)
    order = determine_order(ch, cfg)
    groups = random_pairing_groups(order, cfg)
    return run_pipeline(cfg, ch, order, groups)
