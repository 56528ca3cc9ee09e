import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "src")))

from dynprice.hems import standard_household
from dynprice.methods.baseline import BaselineConfig
from dynprice.methods.ga import GaConfig
from dynprice.scenario import CnoneConfig, CsmConfig, load_config


# =============================================================================
# FIXTURES
# =============================================================================

@pytest.fixture
def household():
    """Dishwasher, PHEV, washing machine, clothes dryer and air-conditioner."""
    return standard_household()


@pytest.fixture
def flat_prices():
    return np.full(24, 10.0)


@pytest.fixture
def random_prices():
    rng = np.random.default_rng(2024)
    return np.round(rng.uniform(6.0, 14.0, size=24), 2)


@pytest.fixture
def small_config():
    """Bundled scenario shrunk to 10 customers and a short GA."""
    config = load_config()
    return config.replace(
        customers=10,
        ga=GaConfig(population=20, generations=5, seed=0),
        csm=CsmConfig(history_days=30, w_max=0.5, noise=0.1),
        cnone=CnoneConfig(history_days=30, max_iter=20_000),
        baseline=BaselineConfig(restarts=2, max_rounds=10),
        jobs=1,
    )
