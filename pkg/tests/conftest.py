from __future__ import annotations

import contextlib

import numpy as np
import pytest

from hiphop.continuation import ContinuationOptions, detect_bifurcations, switch_branch, trace_branch, \
    trace_from_seed
from hiphop.model import Params
from hiphop.shoot import System, trivial_seeds

B_POINT = np.array([1.34958, 0.727361, 7.05373])
Q_FINAL = np.array([0.259786, 0.780202, 5.80955])
P_1257 = np.array([0.886201, 0.557961, 3.61393])

_ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


class _Record:
    def __init__(self):
        self.detail = ""


@pytest.fixture
def acceptance():
    """Context manager recording one acceptance criterion as pass/fail."""

    @contextlib.contextmanager
    def run(number: int, title: str):
        rec = _Record()
        try:
            yield rec
        except BaseException as exc:
            _ACCEPTANCE[number] = (False, title, rec.detail or f"{type(exc).__name__}: {exc}")
            print(f"criterion {number:2d} FAIL  {title}  {_ACCEPTANCE[number][2]}")
            raise
        _ACCEPTANCE[number] = (True, title, rec.detail)
        print(f"criterion {number:2d} PASS  {title}  {rec.detail}")

    return run


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, title, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")


@pytest.fixture(scope="session")
def params():
    return Params(3, 1.0, 2.0)


@pytest.fixture(scope="session")
def dsp_branch(params):
    _, q0 = trivial_seeds(params)
    return trace_branch(q0, System.II, params, ContinuationOptions(a_min=0.25, max_points=3000))


@pytest.fixture(scope="session")
def dsp_candidates(dsp_branch):
    return detect_bifurcations(dsp_branch)


@pytest.fixture(scope="session")
def ssp_seeds(dsp_branch, dsp_candidates, params):
    near = [c for c in dsp_candidates if np.linalg.norm(c.x - B_POINT) < 1e-2]
    assert near, "no bifurcation candidate near B"
    return switch_branch(near[0], dsp_branch, params)


@pytest.fixture(scope="session")
def ssp_branches(ssp_seeds, params):
    opts = ContinuationOptions(max_points=150)
    return [trace_from_seed(s, System.II, params, opts) for s in ssp_seeds]


@pytest.fixture(scope="session")
def ssp_branch(ssp_branches):
    """The child branch that heads toward small T (the one passing P_1257)."""
    return min(ssp_branches, key=lambda br: br.nearest(P_1257)[1])
