import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def crandn(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def dft_matrix(n):
    """Unitary DFT with the zero frequency moved to index n // 2."""
    k = np.arange(n) - n // 2
    j = np.arange(n) - n // 2
    return np.exp(-2j * np.pi * np.outer(k, j) / n) / np.sqrt(n)


def fd_check(params, noisy, clean, h=1e-6):
    """Worst relative gap between analytic and central-difference gradients."""
    from reside.denoiser import loss_and_grad

    _, grads = loss_and_grad(params, noisy, clean)
    worst = 0.0
    for p, g in zip(params.arrays, grads.arrays):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            lp, _ = loss_and_grad(params, noisy, clean)
            p[idx] = old - h
            lm, _ = loss_and_grad(params, noisy, clean)
            p[idx] = old
            fd = (lp - lm) / (2 * h)
            worst = max(worst, abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), 1e-8))
    return worst


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and report.passed:
        return
    n = marker.args[0]
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    prev_ok, prev_details = _CRITERIA.get(n, (True, []))
    _CRITERIA[n] = (prev_ok and report.passed, prev_details + [detail or item.name])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, details = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {' | '.join(details)}")
