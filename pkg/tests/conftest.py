"""Shared pytest configuration.

Markers:
    slow       -- long-running empirical checks (minutes); included by default
                  so the full suite exercises every claim, deselect with
                  ``-m 'not slow'`` during development.
    acceptance -- the end-to-end acceptance criteria in test_acceptance.py.
"""

import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: long-running empirical check (minutes)")
    config.addinivalue_line(
        "markers", "acceptance: end-to-end acceptance criterion")


@pytest.fixture
def rng():
    return np.random.default_rng(0x5EED)
