"""Shared fixtures for the leafspace test suite."""

from functools import lru_cache

import numpy as np
import pytest

from scenario import load_scenario, parse_scenario


@lru_cache(maxsize=None)
def _bundled(name):
    return load_scenario(name)


@pytest.fixture
def bundled():
    """Load a bundled scenario by name (cached across tests)."""
    return _bundled


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def z2(bundled):
    return bundled("z2-reflection").presentation


@pytest.fixture
def circle(bundled):
    return bundled("circle-cover").presentation


@pytest.fixture
def mobius(bundled):
    return bundled("mobius-elliptic3").presentation


@pytest.fixture
def rotations(bundled):
    return bundled("mobius-rotations").presentation


@pytest.fixture
def planar_model():
    """A codimension-2 model with non-affine polynomial maps."""
    text = """
[model] dim=2, box=[-1/2,1/2;-1/2,1/2]
[map] id=f, map="x1 + x2^2/10; x2/2 + 1/10"
[map] id=g, map="x1/2; x2 + x1^2/10"
[connection] name=twist, chart=R, matrix="0, x1*x2 | 0, 0 ; 0, 0 | 0, 0"
"""
    return parse_scenario(text, "planar.scn")
