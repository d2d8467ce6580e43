import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from support import default_links  # noqa: E402


@pytest.fixture
def links():
    return default_links()
