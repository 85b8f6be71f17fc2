"""Shared fixtures: small deterministic panels used across test modules."""

import numpy as np
import pytest

from armm.features import TimeSeries, panel_features
from armm.simulate import simulate_arma


def make_ar_panel(phis, n, count, seed, sigma2=1.0):
    """Panel with `count` series per AR coefficient vector in `phis`."""
    rng = np.random.default_rng(seed)
    out, truth = [], []
    idx = 0
    for g, phi in enumerate(phis):
        for _ in range(count):
            y = simulate_arma(phi, (), sigma2, n, rng)
            out.append(TimeSeries(f"s{idx:03d}", y))
            truth.append(g)
            idx += 1
    return out, np.array(truth)


@pytest.fixture(scope="session")
def separated_panel():
    """Two AR(1) groups at phi = +-0.9, far apart in ACF space."""
    return make_ar_panel([(0.9,), (-0.9,)], n=500, count=10, seed=42)


@pytest.fixture(scope="session")
def separated_features(separated_panel):
    series, _ = separated_panel
    return panel_features(series, 3)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One verdict line per release criterion, when that module ran."""
    try:
        from test_acceptance import CRITERIA, VERDICTS
    except ImportError:
        return
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        if num in VERDICTS:
            ok, detail = VERDICTS[num]
            state = "PASS" if ok else "FAIL"
        else:
            state, detail = "NOT RUN", CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {state} - {detail}")
