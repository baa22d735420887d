import importlib

import pytest
from hypothesis import HealthCheck, settings

from joint_srukf import linalg

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.function_scoped_fixture]
)
settings.load_profile("default")


def _available_backends():
    names = ["_kernels_py"]
    try:
        importlib.import_module("joint_srukf._kernels")
        names.append("_kernels")
    except ImportError:
        pass
    return names


@pytest.fixture(params=_available_backends())
def backend(request, monkeypatch):
    """Run a test once per available kernel implementation."""
    mod = importlib.import_module(f"joint_srukf.{request.param}")
    monkeypatch.setattr(linalg, "kernels", mod)
    return request.param


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
