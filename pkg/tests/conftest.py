"""Shared fixtures: cached scenario sweeps and the acceptance summary printer."""

from __future__ import annotations

import time

import numpy as np
import pytest

from pxflame import runner
from pxflame.config import bundled

CRITERIA = {
    1: "free-boundary slope (flame1d, flame1d-p3)",
    2: "pointwise slope with variable exponent",
    3: "oracle profile equivalence",
    4: "uniform Lipschitz bound",
    5: "energy/residual consistency",
    6: "barrier subsolution",
    7: "comparison and flux monotonicity",
    8: "Harnack quotient stability",
    9: "domain-variation identity order",
    10: "chi fraction and reaction concentration",
    11: "nondegeneracy",
    12: "variable exponent space properties",
}

_RUNS: dict[tuple[str, int], tuple[runner.ScenarioRun, float]] = {}
_OUTCOMES: dict[int, list[tuple[str, str]]] = {}
_DETAILS: dict[int, list[str]] = {}


def cached_sweep(name: str, refine: int = 1) -> tuple[runner.ScenarioRun, float]:
    """(run, wall seconds) for a bundled scenario, computed once per session."""
    key = (name, refine)
    if key not in _RUNS:
        t0 = time.perf_counter()
        run = runner.sweep(bundled(name), refine)
        _RUNS[key] = (run, time.perf_counter() - t0)
    return _RUNS[key]


@pytest.fixture(scope="session")
def sweep_of():
    return cached_sweep


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record(request):
    """Attach a measured value to the criterion the current test belongs to."""
    marker = request.node.get_closest_marker("criterion")

    def _record(text: str):
        if marker is not None:
            _DETAILS.setdefault(marker.args[0], []).append(text)

    return _record


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = report.user_properties and dict(report.user_properties).get("criterion")
    if not n:
        return
    if hasattr(report, "wasxfail"):
        outcome = "xfail" if report.skipped else "xpass"
    else:
        outcome = report.outcome
    _OUTCOMES.setdefault(n, []).append((report.nodeid.split("::")[-1], outcome))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        parts = _OUTCOMES.get(n)
        if not parts:
            tr.write_line(f"criterion {n:2d} {title}: NOT RUN")
            continue
        ok = all(o in ("passed", "xpass") for _, o in parts)
        word = "PASS" if ok else "FAIL"
        failed = [f"{name} ({o})" for name, o in parts if o not in ("passed", "xpass")]
        extra = f"; failing parts: {', '.join(failed)}" if failed else ""
        tr.write_line(f"criterion {n:2d} {title}: {word}{extra}")
        for d in _DETAILS.get(n, []):
            tr.write_line(f"    {d}")
