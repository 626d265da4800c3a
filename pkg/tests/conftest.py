import math

import numpy as np
import pytest

from fieldvision.camera import CameraModel, ExtrinsicChain
from fieldvision.geometry import FieldSpec


@pytest.fixture(scope="session")
def cam():
    return CameraModel()


@pytest.fixture(scope="session")
def spec():
    return FieldSpec()


@pytest.fixture
def chain30():
    return ExtrinsicChain(neck_tilt=math.radians(30))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    lines = [
        v
        for key in ("passed", "failed")
        for rep in terminalreporter.stats.get(key, [])
        if rep.when == "call"
        for k, v in rep.user_properties
        if k == "acceptance"
    ]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
