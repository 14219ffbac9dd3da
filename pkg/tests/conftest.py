"""Shared fixtures.

Node fills are the expensive part of the suite (the finest sphere fill
takes about two minutes), so models, boundary samples, and fills are
built once per session and shared between the unit tests and the
acceptance tests through caching factories.
"""
import numpy as np
import pytest

from cadfill import fill_model, generate_builtin, sample_model_boundary


def _freeze(params: dict) -> tuple:
    return tuple(sorted(params.items()))


@pytest.fixture(scope="session")
def model_cache():
    cache = {}

    def get(name: str, **params):
        key = (name, _freeze(params))
        if key not in cache:
            cache[key] = generate_builtin(name, **params)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def boundary_cache(model_cache):
    """Boundary-only samples, keyed by (model name, h, params). Seed 0."""
    cache = {}

    def get(name: str, h: float, **params):
        key = (name, float(h), _freeze(params))
        if key not in cache:
            model = model_cache(name, **params)
            cache[key] = sample_model_boundary(
                model, h, rng=np.random.default_rng(0))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def fill_cache(model_cache):
    """Full boundary+interior fills, keyed by (name, h, tau, params). Seed 0."""
    cache = {}

    def get(name: str, h: float, tau: float, **params):
        key = (name, float(h), float(tau), _freeze(params))
        if key not in cache:
            model = model_cache(name, **params)
            cache[key] = fill_model(
                model, h, tau, rng=np.random.default_rng(0))
        return cache[key]

    return get
