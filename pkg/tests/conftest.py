import numpy as np
import pytest
from numpy.polynomial.hermite import hermval

from twinbeam.dispersion import FiberGasSystem, FiberGeometry, GasState, omega_from_wavelength
from twinbeam.schmidt import from_modes


def hermite_gauss(n, x):
    coef = np.zeros(n + 1)
    coef[n] = 1
    return hermval(x, coef) * np.exp(-(x**2) / 2)


@pytest.fixture(scope="session")
def fiber75():
    return FiberGasSystem(FiberGeometry(), GasState("argon", 75.0))


@pytest.fixture(scope="session")
def omega800():
    return float(omega_from_wavelength(800e-9))


def synthetic_decomposition(lambdas, n=96, width=1.5, signal_center=2.6e15, idler_center=2.1e15, step=1e13):
    """Hermite-Gauss Schmidt modes on disjoint signal/idler grids."""
    x = np.linspace(-5, 5, n)
    signal = signal_center + x * step
    idler = idler_center + x * step
    phi = [hermite_gauss(k, x / width) for k in range(len(lambdas))]
    chi = [hermite_gauss(k, x / width) for k in range(len(lambdas))]
    return from_modes(signal, idler, phi, chi, lambdas)


@pytest.fixture
def three_mode():
    return synthetic_decomposition([0.42, 0.33, 0.25])


# acceptance reporting: one line per criterion in the terminal summary
_ACCEPTANCE = {}


@pytest.fixture
def report(request):
    """Attach a one-line detail string to the current acceptance test."""
    def record(detail):
        request.node.user_properties.append(("detail", detail))
        print(detail)
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0]
    failed = rep.failed
    if rep.when == "call" or failed:
        ok, details = _ACCEPTANCE.get(label, (True, []))
        if rep.when == "call":
            details = details + [v for k, v in item.user_properties if k == "detail"]
        _ACCEPTANCE[label] = (ok and not failed, details)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split("-")[1])):
        ok, details = _ACCEPTANCE[label]
        terminalreporter.write_line(f"{label} {'PASS' if ok else 'FAIL'}  {'; '.join(details)}")
