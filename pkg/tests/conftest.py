import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mvtrack.geometry import CameraModel, Rig, look_at_camera

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def ring_rig(n=4, radius=6.0, height=3.0, focal=800.0, size=(1280, 720)):
    cams = []
    for i in range(n):
        a = 2 * np.pi * i / n + 0.3
        pos = (radius * np.cos(a), radius * np.sin(a), height)
        cams.append(look_at_camera(i, pos, (0.0, 0.0, 0.8), focal, size))
    return Rig(cams)


@pytest.fixture
def rig4():
    return ring_rig(4)


@pytest.fixture
def identity_cam():
    return CameraModel(0, np.hstack([np.eye(3), np.zeros((3, 1))]))


def pytest_terminal_summary(terminalreporter):
    lines = getattr(terminalreporter.config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
