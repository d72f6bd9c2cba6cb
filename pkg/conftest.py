import numpy as np
import pytest
import sqlalchemy

from data_model.base_model import BaseDBSession
from ehrelay.model import SystemConfig

class MockDBSession(BaseDBSession):
        def __init__(self):
            engine = sqlalchemy.create_engine(f'sqlite:///:memory:')
            self.engine = engine
            super().__init__(engine)

@pytest.fixture
def mock_db():
    return MockDBSession()

@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

@pytest.fixture
def reference_config():
    """ R = 2 BPCU, eta = 1, unit variances, 40 dB """
    return SystemConfig.from_snr_db(pairs=2, rate=2.0, snr_db=40.0)
