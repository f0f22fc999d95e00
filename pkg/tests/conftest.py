import numpy as np
import pytest
from hypothesis import settings

from opstat import kernels

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

BACKENDS = sorted(kernels.available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route the hot kernels through one backend for the duration of a test."""
    impl = kernels.available_backends()[request.param]
    for name in ("euler_maruyama", "clip_cells", "rasterize"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    monkeypatch.setattr(kernels, "BACKEND", request.param)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


def record_criterion(n, line):
    _CRITERIA[n] = line


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
