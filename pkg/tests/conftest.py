import numpy as np
import pytest

from rhopomcpow.envs import ActiveLocalization, LightDark2D


@pytest.fixture
def light_dark():
    return LightDark2D(beacons=[[-4.0, 3.0], [3.0, 7.0]], x0=[0.0, 0.0], goal=[0.0, 7.0])


@pytest.fixture
def active_loc():
    return ActiveLocalization(beacons=[[2.0, 0.0], [0.0, 6.0]], x0=[0.0, 0.0],
                              obstacles=[[3.0, 3.0, 1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
