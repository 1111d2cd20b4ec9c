import numpy as np
import pytest

from ris_urllc.baselines import SCHEMES, run_scheme
from ris_urllc.channels import realize_channels
from ris_urllc.config import allocation_violations, make_config
from ris_urllc.metrics import q_function
from ris_urllc.ordering import determine_order


class TestSchemes:
    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError, match="unknown scheme"):
            run_scheme("fancy", make_config())

    def test_equal_power_hits_cap_with_ample_energy(self):
        # share E0/(T_sym m K) = 100/80 exceeds the 0.3 W cap
        cfg = make_config(K=4, Nt=2, N=6, E0=100.0, seed=1)
        alloc, rep = run_scheme("equal_power", cfg)
        np.testing.assert_allclose(alloc.p, 0.3, rtol=1e-12)

    def test_equal_power_splits_budget(self):
        cfg = make_config(K=4, Nt=2, N=6, E0=10.0, seed=1)
        alloc, _ = run_scheme("equal_power", cfg)
        np.testing.assert_allclose(alloc.p, 10.0 / (1.0 * 20.0 * 4), rtol=1e-12)

    def test_pure_noma_single_chain(self):
        cfg = make_config(K=4, Nt=2, N=6, seed=2)
        ch = realize_channels(cfg)
        alloc, _ = run_scheme("pure_noma", cfg, ch)
        assert len(alloc.groups) == 1 and len(alloc.groups[0]) == 4
        order = determine_order(ch, cfg)
        expected = tuple(sorted(range(4), key=lambda k: order.pi[k]))
        assert alloc.groups[0] == expected
        assert alloc.pairing is None

    def test_random_phase_frozen(self):
        cfg = make_config(K=4, Nt=2, N=6, seed=3)
        ch = realize_channels(cfg)
        alloc, _ = run_scheme("random_phase", cfg, ch)
        proposed, _ = run_scheme("proposed", cfg, ch)
        assert not np.allclose(alloc.phi, proposed.phi)
        np.testing.assert_allclose(np.abs(alloc.phi), 1.0, atol=1e-12)

    def test_location_split_by_distance(self):
        cfg = make_config(K=4, Nt=2, N=6, seed=4)
        ch = realize_channels(cfg)
        alloc, _, trace = run_scheme("location_sic", cfg, ch, with_trace=True)
        nearest = tuple(sorted(sorted(range(4), key=lambda k: ch.d[k])[:2]))
        leads = tuple(sorted(g[0] for g in alloc.groups))
        assert leads == nearest

    def test_every_scheme_satisfies_hard_constraints(self):
        for seed in (0, 1):
            cfg = make_config(K=4, Nt=2, N=6, seed=seed)
            ch = realize_channels(cfg)
            for scheme in SCHEMES:
                alloc, rep = run_scheme(scheme, cfg, ch)
                bad = allocation_violations(alloc, cfg, require_integer_m=True)
                assert bad == [], (scheme, bad)
                assert rep.worst_eps == pytest.approx(
                    float(q_function(rep.chi)), abs=1e-10
                )

    def test_proposed_dominates_random_pairing_exactly(self):
        for seed in range(4):
            cfg = make_config(K=4, Nt=2, N=6, seed=seed)
            ch = realize_channels(cfg)
            _, rep_p = run_scheme("proposed", cfg, ch)
            _, rep_r = run_scheme("random_pairing", cfg, ch)
            assert rep_p.worst_eps <= rep_r.worst_eps
