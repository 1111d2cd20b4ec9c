import numpy as np
import pytest

from oracles import best_chi_power_grid_k2
from ris_urllc.channels import realize_channels
from ris_urllc.config import allocation_violations, make_config
from ris_urllc.metrics import combined_channel, min_g, q_function
from ris_urllc.ordering import determine_order
from ris_urllc.pipeline import (
    ao_inner_loop,
    initial_allocation,
    random_pairing_groups,
    run_pipeline,
    run_three_step,
)


class TestAoInnerLoop:
    def test_matches_power_grid_when_only_power_moves(self):
        # Nt = N = 1 freezes combiners and reflection to scalars, so the
        # alternating loop reduces to power + blocklength at m = 20
        for seed in range(5):
            cfg = make_config(K=2, Nt=1, N=1, seed=seed)
            ch = realize_channels(cfg)
            order = determine_order(ch, cfg)
            groups = random_pairing_groups(order, cfg)
            alloc, trace, _, _ = ao_inner_loop(ch, order, groups, cfg)
            s, w = alloc.groups[0]
            qs = combined_channel(ch.H, alloc.phi, ch.f[s])[0]
            qw = combined_channel(ch.H, alloc.phi, ch.f[w])[0]
            chi_grid = best_chi_power_grid_k2(
                abs(qs) ** 2, abs(qw) ** 2, cfg.sigma2, 20.0,
                cfg.D[s], cfg.D[w], cfg.p_max, cfg.E0, cfg.T_sym, n=200,
            )
            assert min_g(ch, alloc, cfg) >= chi_grid - 1e-3

    def test_rerun_from_converged_output_is_fixed_point(self):
        cfg = make_config(K=4, Nt=2, N=6, seed=3)
        ch = realize_channels(cfg)
        order = determine_order(ch, cfg)
        groups = random_pairing_groups(order, cfg)
        alloc, trace, _, term = ao_inner_loop(ch, order, groups, cfg)
        chi1 = min_g(ch, alloc, cfg)
        alloc2, trace2, _, _ = ao_inner_loop(ch, order, groups, cfg, alloc0=alloc)
        chi2 = min_g(ch, alloc2, cfg)
        assert abs(chi2 - chi1) <= cfg.ao_tol + 1e-9

    def test_chi_trace_non_decreasing(self):
        for seed in range(5):
            cfg = make_config(K=4, Nt=2, N=6, seed=seed)
            ch = realize_channels(cfg)
            order = determine_order(ch, cfg)
            groups = random_pairing_groups(order, cfg)
            _, trace, _, _ = ao_inner_loop(ch, order, groups, cfg)
            assert len(trace) >= 1
            assert np.all(np.diff(trace) >= -1e-8)

    def test_initial_allocation_feasible(self):
        cfg = make_config(K=4, Nt=3, N=8, seed=1)
        ch = realize_channels(cfg)
        order = determine_order(ch, cfg)
        groups = random_pairing_groups(order, cfg)
        alloc = initial_allocation(ch, order.phi0, groups, cfg)
        assert allocation_violations(alloc, cfg) == []


class TestThreeStep:
    def test_single_pair_pairing_is_vacuous(self):
        cfg = make_config(K=2, Nt=2, N=4, seed=5)
        ch = realize_channels(cfg)
        alloc, rep, trace = run_three_step(cfg, ch)
        order = determine_order(ch, cfg)
        groups = random_pairing_groups(order, cfg)
        alloc2, rep2, _ = run_pipeline(cfg, ch, order, groups, do_pairing=False)
        assert alloc.groups == alloc2.groups
        assert rep.worst_eps == rep2.worst_eps

    def test_repairing_never_hurts(self):
        for seed in range(5):
            cfg = make_config(K=4, Nt=2, N=6, seed=seed)
            ch = realize_channels(cfg)
            order = determine_order(ch, cfg)
            groups = random_pairing_groups(order, cfg)
            _, rep_random, _ = run_pipeline(cfg, ch, order, groups, do_pairing=False)
            _, rep_paired, _ = run_pipeline(cfg, ch, order, groups, do_pairing=True)
            assert rep_paired.worst_eps <= rep_random.worst_eps + 1e-15

    def test_deterministic_trace(self):
        cfg = make_config(K=4, Nt=2, N=6, seed=7)
        _, rep1, tr1 = run_three_step(cfg)
        _, rep2, tr2 = run_three_step(cfg)
        assert tr1.chi == tr2.chi
        assert rep1.worst_eps == rep2.worst_eps
        assert tr1.to_dict()["report"] == tr2.to_dict()["report"]

    def test_objective_report_consistency(self):
        cfg = make_config(K=4, Nt=2, N=6, seed=9)
        _, rep, trace = run_three_step(cfg)
        assert rep.worst_eps == pytest.approx(float(q_function(rep.chi)), abs=1e-10)

    def test_final_allocation_clean(self):
        cfg = make_config(K=4, Nt=3, N=8, seed=11)
        ch = realize_channels(cfg)
        alloc, rep, trace = run_three_step(cfg, ch)
        order = determine_order(ch, cfg)
        bad = allocation_violations(
            alloc, cfg, strong=order.strong, weak=order.weak, require_integer_m=True
        )
        assert bad == []
        assert trace.termination in ("converged", "iteration_cap")
        assert trace.chi_pairing is not None

    def test_trace_serialization(self):
        cfg = make_config(K=2, Nt=2, N=4, seed=13)
        _, _, trace = run_three_step(cfg)
        d = trace.to_dict()
        assert set(d) >= {"chi_trace", "step_seconds", "termination", "report", "m"}
