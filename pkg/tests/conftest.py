import numpy as np
import pytest

from bispheric import config


@pytest.fixture(scope="session")
def six_scenario():
    return config.scenario_from_dict(config.six_agent_scenario())


@pytest.fixture(scope="session")
def oct_scenario():
    return config.scenario_from_dict(config.octahedron_scenario())


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_tetrahedron(rng, spread=2.0, min_sep=0.3, min_sin=0.15):
    """Non-degenerate 4-point sample shared by the geometry-heavy tests."""
    from bispheric import geometry

    while True:
        pts = rng.uniform(-spread, spread, size=(4, 3))
        p_i, p_j, p_k, p_l = pts
        seps = [
            np.linalg.norm(a - b)
            for a, b in (
                (p_i, p_j), (p_i, p_k), (p_i, p_l),
                (p_j, p_k), (p_j, p_l), (p_k, p_l),
            )
        ]
        if min(seps) < min_sep:
            continue
        xi_l = geometry.xi_of(geometry.bearing(p_l, p_i), geometry.bearing(p_l, p_j))
        xi_k = geometry.xi_of(geometry.bearing(p_k, p_i), geometry.bearing(p_k, p_j))
        if min(np.sin(xi_l), np.sin(xi_k)) < min_sin:
            continue
        n = np.cross(geometry.bearing(p_j, p_i), geometry.bearing(p_k, p_i))
        if np.linalg.norm(n) < min_sin:
            continue
        return pts
