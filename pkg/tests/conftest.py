"""Shared fixtures: model bundles, samplers, and a relaxed hypothesis profile."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nonholo.models import build_model

settings.register_profile(
    "fd_heavy",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fd_heavy")


@pytest.fixture(scope="session")
def racer():
    return build_model("roller-racer")


@pytest.fixture(scope="session")
def ball():
    return build_model("rolling-ball")


@pytest.fixture(scope="session")
def toy():
    return build_model("euclidean-toy")


@pytest.fixture(scope="session")
def toy_constrained():
    return build_model("euclidean-toy", constrained=True)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def sample_points(bundle, n, seed=0):
    """Uniform draws from the model's declared chart box."""
    gen = np.random.default_rng(seed)
    box = bundle.sample_box
    return gen.uniform(box[:, 0], box[:, 1], size=(n, box.shape[0]))


def check_projection_algebra(spec, P, atol=1e-10):
    """Assert the defining algebra of the three-way splitting at one point."""
    n = spec.dim
    eye = np.eye(n)
    assert np.abs(P.P_I + P.P_II + P.P_III - eye).max() < atol
    for A in (P.P_I, P.P_II, P.P_III):
        assert np.abs(A @ A - A).max() < atol
    # mutual annihilation and metric self-adjointness
    assert np.abs(P.P_I @ P.P_II).max() < atol
    assert np.abs(P.P_II @ P.P_III).max() < atol
    assert np.abs(P.P_III @ P.P_I).max() < atol
    for A in (P.P_I, P.P_II, P.P_III):
        gA = P.g @ A
        assert np.abs(gA - gA.T).max() < atol * (1.0 + np.abs(P.g).max())
    # coprojections are metric conjugates (and transposes)
    for A, As in ((P.P_I, P.Pstar_I), (P.P_II, P.Pstar_II), (P.P_III, P.Pstar_III)):
        assert np.abs(As - A.T).max() < atol * (1.0 + np.abs(A).max())
    ranks = tuple(int(round(np.trace(A))) for A in (P.P_I, P.P_II, P.P_III))
    assert ranks == (spec.N - spec.nu, spec.nu, spec.M)
