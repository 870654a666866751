import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hyperfrac.calibration import load_calibration  # noqa: E402
from hyperfrac.geometry import HyperbolicSpace  # noqa: E402

ACCEPTANCE_TITLES = {
    1: "heat kernel unit mass",
    2: "heat transform and round trip",
    3: "Poisson kernel unit mass",
    4: "H3 Poisson closed form vs subordination",
    5: "sigma = 1/2 Poisson symbol",
    6: "multiplier identity",
    7: "isometry constant of the Poisson extension",
    8: "sharp inhomogeneous Hardy equality",
    9: "homogeneous ground state",
    10: "quadratic form and pointwise integral representations",
    11: "Dirichlet-to-Neumann recovery",
    12: "L^q classification of the Poisson kernel",
    13: "kernel estimate envelopes and negative control",
    14: "Bessel-Green-Riesz kernel",
    15: "Poincare-Sobolev scan",
    16: "Poisson contraction on L^p",
    17: "default verification batch",
}
_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """record(k, passed, detail) stores one acceptance line."""
    def _record(k: int, passed: bool, detail: str) -> bool:
        _RESULTS[k] = (bool(passed), detail)
        return bool(passed)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k, title in ACCEPTANCE_TITLES.items():
        if k in _RESULTS:
            ok, detail = _RESULTS[k]
            tr.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        else:
            tr.write_line(f"criterion {k:2d} NOT RUN  {title}")


@pytest.fixture(scope="session")
def h3():
    return HyperbolicSpace(3)


@pytest.fixture(scope="session")
def calibration():
    return load_calibration()
