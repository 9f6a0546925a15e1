import functools

import pytest

from qdqkd.dynamics import NumericsSettings
from qdqkd.metrics import simulate_photon_stats
from qdqkd.model import preset


@functools.lru_cache(maxsize=None)
def preset_stats(name: str, delta_hv: float = 1.5, **numerics):
    """Photon statistics of a preset at default numerics, memoised per session."""
    spec = preset(name, delta_hv=delta_hv)
    return simulate_photon_stats(spec, NumericsSettings(**numerics), scheme=name)


@pytest.fixture(scope="session")
def stats_of():
    return preset_stats
