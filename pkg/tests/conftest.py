import sys
from pathlib import Path

import pytest

# Make the sibling oracles module importable from any test file.
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def write_csv(tmp_path):
    """Write text to a temp CSV and return its path."""

    counter = {"n": 0}

    def _write(text, name=None):
        counter["n"] += 1
        path = tmp_path / (name or f"file{counter['n']}.csv")
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write
