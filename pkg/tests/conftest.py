"""Shared fixtures: the two channel setups used throughout the suite."""

import pytest

from edgefresh.model import ChannelRates


@pytest.fixture
def rates():
    """Symmetric 1000/1000 items-per-second channel."""
    return ChannelRates(r_ul=1000.0, r_dl=1000.0)


@pytest.fixture
def rates_asym():
    """Uplink-limited 300/1000 channel."""
    return ChannelRates(r_ul=300.0, r_dl=1000.0)
