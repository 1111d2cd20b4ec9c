import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ris_urllc.channels import ChannelRealization
from ris_urllc.config import make_config


def synthetic_channels(cfg, rng, scale=1.0):
    """Random complex channels of the configured shape, unit-order entries."""
    H = scale * (rng.standard_normal((cfg.N, cfg.Nt)) + 1j * rng.standard_normal((cfg.N, cfg.Nt)))
    f = tuple(
        scale * (rng.standard_normal(cfg.N) + 1j * rng.standard_normal(cfg.N))
        for _ in range(cfg.K)
    )
    pos = np.tile(np.array([100.0, 0.0, 0.0]), (cfg.K, 1))
    return ChannelRealization(H=H, f=f, user_pos=pos, d0=10.0, d=np.full(cfg.K, 100.0))


def unit_rows(rng, k, n):
    w = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def unit_modulus(rng, n):
    return np.exp(2j * np.pi * rng.uniform(size=n))


@pytest.fixture
def base_cfg():
    return make_config(K=4, Nt=3, N=8, seed=0)
