import numpy as np
import pytest

from oracles import best_integer_blocklength, g_direct, golden_section_max
from ris_urllc.blocklength import greedy_round, optimize_blocklength
from ris_urllc.config import make_config
from ris_urllc.metrics import g_values


class TestContinuous:
    def test_latency_cap_binds_with_energy_slack(self):
        cfg = make_config(E0=1e3)
        gamma = np.array([3.0, 5.0, 2.0, 8.0])
        m, chi = optimize_blocklength(gamma, np.full(4, 0.3), cfg)
        assert m == 20.0

    def test_energy_cap_binds(self):
        cfg = make_config(E0=1.5)  # 1.5 / (1 s * 0.12 W) = 12.5 symbols
        gamma = np.array([3.0, 5.0, 2.0, 8.0])
        m, chi = optimize_blocklength(gamma, np.full(4, 0.03), cfg)
        assert m == pytest.approx(12.5, rel=1e-12)

    def test_known_value(self):
        cfg = make_config(K=2, T=16.0, T_sym=1.0, E0=1e3, D=16)
        m, chi = optimize_blocklength(np.array([3.0, 3.0]), np.array([0.1, 0.1]), cfg)
        assert m == 16.0
        assert chi == pytest.approx(2.7726, abs=1e-4)
        assert chi == pytest.approx(4.0 * np.log(2.0), rel=1e-12)

    def test_agrees_with_golden_section(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            cfg = make_config(E0=float(rng.uniform(0.5, 30.0)))
            gamma = rng.uniform(0.5, 50.0, 4)
            p = rng.uniform(0.01, 0.3, 4)
            m_star, chi_star = optimize_blocklength(gamma, p, cfg)

            def chi_of(m):
                return float(np.min(g_values(gamma, m, cfg.D)))

            m_ub = min(20.0, cfg.E0 / (cfg.T_sym * p.sum()))
            m_gs, chi_gs = golden_section_max(chi_of, 1.0, m_ub, tol=1e-9)
            assert m_star == pytest.approx(m_gs, abs=1e-6)
            # the 1e-9 search tolerance on m admits ~gradient * 1e-9 in chi
            assert chi_star == pytest.approx(chi_gs, abs=1e-7)

    def test_monotone_in_m(self):
        gamma = np.array([0.5, 4.0])
        grid = np.linspace(1.0, 20.0, 100)
        vals = [float(np.min(g_values(gamma, m, [16, 16]))) for m in grid]
        assert np.all(np.diff(vals) > 0)

    def test_nonpositive_sinr_rejected(self):
        cfg = make_config()
        with pytest.raises(ValueError, match="positive"):
            optimize_blocklength(np.array([1.0, 0.0, 1.0, 1.0]), np.full(4, 0.1), cfg)

    def test_budget_below_one_symbol(self):
        cfg = make_config(E0=0.05)
        with pytest.raises(ValueError, match="symbol"):
            optimize_blocklength(np.full(4, 3.0), np.full(4, 0.3), cfg)


class TestGreedyRound:
    def test_integer_at_cap(self):
        cfg = make_config(E0=1e3)
        assert greedy_round(20.0, np.full(4, 0.3), np.full(4, 3.0), cfg) == 20

    def test_floor_under_binding_budget(self):
        cfg = make_config(E0=1.5)
        assert greedy_round(12.5, np.full(4, 0.03), np.full(4, 3.0), cfg) == 12

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            cfg = make_config(E0=float(rng.uniform(0.5, 30.0)))
            gamma = rng.uniform(0.5, 50.0, 4)
            p = rng.uniform(0.01, 0.3, 4)
            try:
                m_real, _ = optimize_blocklength(gamma, p, cfg)
            except ValueError:
                continue
            m_int = greedy_round(m_real, p, gamma, cfg)
            m_best, _ = best_integer_blocklength(
                gamma, cfg.D, float(p.sum()), 20, cfg.E0, cfg.T_sym
            )
            assert m_int == m_best

    def test_never_degrades_floor(self):
        cfg = make_config(E0=1e3)
        gamma = np.full(4, 4.0)
        m_int = greedy_round(7.3, np.full(4, 0.01), gamma, cfg)
        floor_chi = min(g_direct(g, 7, d) for g, d in zip(gamma, cfg.D))
        final_chi = min(g_direct(g, m_int, d) for g, d in zip(gamma, cfg.D))
        assert final_chi >= floor_chi

    def test_invariants(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            cfg = make_config(E0=float(rng.uniform(0.5, 30.0)))
            p = rng.uniform(0.01, 0.3, 4)
            gamma = rng.uniform(0.5, 50.0, 4)
            try:
                m_real, _ = optimize_blocklength(gamma, p, cfg)
            except ValueError:
                continue
            m_int = greedy_round(m_real, p, gamma, cfg)
            assert 1 <= m_int <= 20
            assert cfg.T_sym * m_int * p.sum() <= cfg.E0 + 1e-12

    def test_below_one_symbol_rejected(self):
        cfg = make_config()
        with pytest.raises(ValueError):
            greedy_round(0.4, np.full(4, 0.1), np.full(4, 1.0), cfg)
