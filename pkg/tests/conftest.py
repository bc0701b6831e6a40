import os

import pytest


@pytest.fixture(scope="session", autouse=True)
def acceptance_cache(tmp_path_factory):
    """Shared artifact root for the acceptance trainers (override via env to
    keep artifacts across sessions while iterating)."""
    if not os.environ.get("COOPLAB_TEST_CACHE"):
        os.environ["COOPLAB_TEST_CACHE"] = str(tmp_path_factory.mktemp("acceptance"))
    return os.environ["COOPLAB_TEST_CACHE"]
