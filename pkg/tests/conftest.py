import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from trimwave.geometry import GeometrySpec, LatticeBox, build_box, build_trim_mask, single_layer_gamma0

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def path(n):
    return LatticeBox.from_shape((n,), "simple")


def ring(n):
    return LatticeBox.from_shape((n,), "periodic")


def strip(p=2, m2=2, k=4, q=None):
    """``d1 = d2 = 1`` box with the single-layer trim."""
    spec = GeometrySpec(1, 1, (p, q or p), 0, m2, (k,))
    box = build_box(spec)
    return box, build_trim_mask(box, single_layer_gamma0(spec))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
