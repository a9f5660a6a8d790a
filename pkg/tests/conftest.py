import math

import pytest
from scipy import constants as sc

from ionheat.config import ConfigDocument

# Independent reference values, computed from scipy.constants directly
SR88_MASS_AMU = 87.9050635
AXIAL_HZ = 1.32e6


def se_per_rate_oracle(mass_amu=SR88_MASS_AMU, f=AXIAL_HZ):
    m = mass_amu * sc.physical_constants["atomic mass constant"][0]
    return 4 * m * sc.hbar * 2 * math.pi * f / sc.e**2


@pytest.fixture(scope="session")
def cfg():
    return ConfigDocument.load()


@pytest.fixture(scope="session")
def trap(cfg):
    return cfg.trap()


@pytest.fixture(scope="session")
def sr88(cfg):
    return cfg.ion("Sr88")


@pytest.fixture(scope="session")
def gases(cfg):
    return {name: cfg.gas(name, 55.0) for name in ("H2", "N2", "O2")}


# acceptance verdict lines, echoed in the terminal summary
ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
