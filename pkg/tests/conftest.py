import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geofwd.geometry import HopContext, build_progress_model  # noqa: E402


@pytest.fixture(scope="session")
def ctx10():
    return HopContext(10.0, 5)


@pytest.fixture(scope="session")
def model10(ctx10):
    return build_progress_model(ctx10)


@pytest.fixture(scope="session")
def models():
    cache = {}

    def get(L):
        if L not in cache:
            cache[L] = build_progress_model(HopContext(L))
        return cache[L]

    return get
