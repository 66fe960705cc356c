from pathlib import Path

import pytest

from phishscan import gateway
from phishscan.gateway import ProviderProfile

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(autouse=True)
def fresh_gateway():
    """Isolate per-profile semaphores and mock instances between tests."""
    gateway.reset_gateway_state()
    yield
    gateway.reset_gateway_state()


@pytest.fixture
def corpus_root() -> Path:
    return DATA_DIR / "corpus"


@pytest.fixture
def eml_dir() -> Path:
    return DATA_DIR / "eml"


@pytest.fixture
def mock_profile() -> ProviderProfile:
    return ProviderProfile(name="mock-test", endpoint="mock://local",
                           model_id="mock-rules", adapter="mock")
