"""Shared fixtures: a miniature model configuration and seeded weights.

Everything here is sized so brute-force checks stay fast while still
exercising every code path (multi-head attention, input projections,
window saturation, probsparse sampling).
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from surgphase.config import ModelConfig, SparseConfig
from surgphase.seqtypes import FeatureSequence
from surgphase.verify import toy_config
from surgphase.weights import WeightStore, synth_weights

settings.register_profile(
    "package",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("package")


@pytest.fixture(scope="session")
def toy_cfg() -> ModelConfig:
    """Tiny full-wiring model: K=5, dims 32/16/8/4, windows 6/14."""
    return toy_config(seed=0)


@pytest.fixture(scope="session")
def toy_store(toy_cfg: ModelConfig) -> WeightStore:
    return synth_weights(toy_cfg, 2024)


@pytest.fixture(scope="session")
def mid_cfg() -> ModelConfig:
    """Same dims as toy but with windows large enough to stagger caches."""
    return ModelConfig(
        num_phases=5,
        feature_dim=32,
        dim_short=16,
        dim_long=8,
        dim_global=4,
        window_short=30,
        window_long=120,
        num_heads=4,
        ff_multiplier=2.0,
        sparse=SparseConfig(seed=0),
    )


@pytest.fixture(scope="session")
def mid_store(mid_cfg: ModelConfig) -> WeightStore:
    return synth_weights(mid_cfg, 17)


def make_embeddings(cfg: ModelConfig, frames: int, seed: int) -> FeatureSequence:
    rows = np.random.default_rng(seed).normal(size=(frames, cfg.feature_dim))
    return FeatureSequence(role="e", start_frame=1, data=rows)
