import numpy as np
import pytest

from dnn_scaler.catalog import load_catalog
from dnn_scaler.config import ControllerSettings
from dnn_scaler.perfmodel import SimulatedGpu


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture
def settings():
    return ControllerSettings()


@pytest.fixture
def quiet_settings():
    """Noise-free simulator: every latency equals its model mean."""
    return ControllerSettings(sigma=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def make_backend(catalog, quiet_settings):
    """
    Build a SimulatedGpu for a catalog row; settings default to the noise-free
    ones and can be overridden per call.
    """
    def _make(dnn_id, dataset_tag="imagenet", settings=None):
        s = settings or quiet_settings
        entry = catalog.get(dnn_id, dataset_tag)
        return entry, SimulatedGpu(catalog.models(entry, s), max_mtl=s.max_mtl, abs_max_bs=s.abs_max_bs)
    return _make
