import os
import sys
from fractions import Fraction

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")


def dec(s: str) -> Fraction:
    """Exact rational from a decimal literal."""
    return Fraction(s)


@pytest.fixture
def rng():
    import random

    return random.Random(20240611)


# criterion lines recorded by test_acceptance.py, printed once at the end
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
