from __future__ import annotations

import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rodhomog import _fallback
from rodhomog.cross_section import build_primitive, normalize_axes
from rodhomog.material import make_isotropic

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=15, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

try:
    from rodhomog import _kernels
except ImportError:  # extension not built
    _kernels = None

BACKENDS = [pytest.param(_fallback, id="python")]
if _kernels is not None:
    BACKENDS.append(pytest.param(_kernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def section(kind, params, resolution):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return normalize_axes(build_primitive(kind, params, resolution))


@pytest.fixture(scope="session")
def disc_small():
    """Unit disc with about 200 triangles, principal axes."""
    return section("disc", [1.0], 200)


@pytest.fixture(scope="session")
def disc_medium():
    return section("disc", [1.0], 1500)


@pytest.fixture(scope="session")
def square_small():
    return section("rectangle", [1.0, 1.0], 200)


@pytest.fixture(scope="session")
def iso_law():
    return make_isotropic(0.5, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance summary

_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        # parametrized criteria pass only if every case passes
        _, verdict, seconds = _ACCEPTANCE.get(number, (title, "PASS", 0.0))
        if not rep.passed:
            verdict = "FAIL"
        _ACCEPTANCE[number] = (title, verdict, seconds + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, seconds = _ACCEPTANCE[number]
        terminalreporter.write_line(f"AC{number:02d} {verdict}  {title} ({seconds:.1f} s)")
