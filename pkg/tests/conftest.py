import numpy as np
import pytest

from hawkesmix import BetaMixture, EventSequence, ExcitationModel, HawkesParams


def random_mixture(rng, h, shape_low=0.5, shape_high=8.0):
    p = rng.dirichlet(np.ones(h))
    a = rng.uniform(shape_low, shape_high, size=h)
    b = rng.uniform(shape_low, shape_high, size=h)
    return BetaMixture(p, a, b)


def random_excitation(rng, K, h0=2, h=2, T0=1.0, eps=None, shape_low=0.5, shape_high=8.0):
    if eps is None:
        eps = float(rng.uniform(0, 1))
    common = random_mixture(rng, h0, shape_low, shape_high)
    idio = tuple(tuple(random_mixture(rng, h, shape_low, shape_high) for _ in range(K)) for _ in range(K))
    return ExcitationModel(eps=eps, common=common, idio=idio, T0=T0)


def random_params(rng, K, T0=1.0, **kw):
    mu = rng.uniform(0.2, 1.0, size=K)
    alpha = rng.uniform(0.05, 0.6 / K, size=(K, K))
    return HawkesParams(mu, alpha, random_excitation(rng, K, T0=T0, **kw))


def random_sequence(rng, n, K, T):
    times = np.sort(rng.uniform(0, T, size=n))
    while np.any(np.diff(times) <= 0):
        times = np.sort(rng.uniform(0, T, size=n))
    dims = rng.integers(0, K, size=n)
    return EventSequence(times, dims, T, K)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def uniform_kernel_model():
    """Single uniform component on both blend sides: density 1 on (0, 1)."""
    uni = BetaMixture(np.array([1.0]), np.array([1.0]), np.array([1.0]))
    idio = ((uni,),)
    return ExcitationModel(eps=0.5, common=uni, idio=idio, T0=1.0)
