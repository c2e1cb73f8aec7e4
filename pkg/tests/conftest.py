import math

import numpy as np
import pytest

from spectralab.assemble import assemble
from spectralab.coeffs import preset
from spectralab.domain import Annulus, CircleArc, Interval, Rectangle, build_mesh

PI = math.pi


@pytest.fixture(scope="session")
def interval_spec():
    return Interval(0.0, PI)


@pytest.fixture(scope="session")
def square_spec():
    return Rectangle(0.0, PI, 0.0, PI)


@pytest.fixture(scope="session")
def annulus_spec():
    return Annulus(math.sqrt(8.0), 4.0)


@pytest.fixture(scope="session")
def arc_spec():
    return CircleArc(1.0, PI)


@pytest.fixture(scope="session")
def problem_cache():
    """Session cache of assembled problems keyed by (kind, resolution, preset)."""
    cache = {}

    def get(spec, resolution, coeff_name, n, **params):
        key = (repr(spec), resolution, coeff_name, repr(sorted(params.items())))
        if key not in cache:
            mesh = build_mesh(spec, resolution)
            coeffs = preset(coeff_name, n, **params)
            cache[key] = (mesh, coeffs, assemble(mesh, coeffs))
        return cache[key]

    return get


def interval_eigs_discrete(num_elements: int, count: int) -> np.ndarray:
    """Exact eigenvalues of the P1 consistent-mass discretization of the
    Dirichlet problem on (0, pi) with a uniform mesh."""
    h = PI / num_elements
    ks = np.arange(1, count + 1)
    return (6.0 / h**2) * (1.0 - np.cos(ks * h)) / (2.0 + np.cos(ks * h))
