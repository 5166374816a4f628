import os

import numpy as np
import pytest

from hypgrowth.boundary_map import build_bowen_series, build_finite_partition
from hypgrowth.config import HarnessConfig, ThermoConfig
from hypgrowth.groups import get_group
from hypgrowth.ldp import LOWER, UPPER, default_alphas, simulate
from hypgrowth.thermo import pressure_curve, spectrum_curve


class System:
    def __init__(self, name):
        self.pres, self.dom = get_group(name)
        self.f = build_bowen_series(self.dom)
        self.part = build_finite_partition(self.f)
        self._curve = None
        self._spec = None
        self.cfg = ThermoConfig()

    @property
    def curve(self):
        if self._curve is None:
            self._curve = pressure_curve(self.part, self.cfg)
        return self._curve

    @property
    def spectrum(self):
        if self._spec is None:
            self._spec = spectrum_curve(self.curve, self.cfg)
        return self._spec

    def ldp_cells(self):
        """Two alphas on each side of alpha_G (octagon) or four upper cells (quad)."""
        s = self.spectrum
        if self.dom.cusps:
            lo, hi = s.alpha_lo, s.alpha_hi
            return [(lo + q * (hi - lo), UPPER) for q in (0.1, 0.2, 0.3, 0.4)]
        return default_alphas(s, (0.2, 0.3))

    @property
    def ldp(self):
        """Monte-Carlo tails at N = 1e6, n = 10..30 plus the alpha_G cells."""
        if getattr(self, "_ldp", None) is None:
            cells = self.ldp_cells()
            if not self.dom.cusps:
                cells = [(self.spectrum.alpha_G, UPPER), (self.spectrum.alpha_G, LOWER)] + cells
            self._ldp = simulate(self.f, self.part, self.spectrum, cells, HarnessConfig())
        return self._ldp


@pytest.fixture(scope="session")
def octagon():
    return System("octagon")


@pytest.fixture(scope="session")
def quad():
    return System("quad")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_collection_modifyitems(config, items):
    if os.environ.get("HYPGROWTH_SKIP_SLOW"):
        skip = pytest.mark.skip(reason="HYPGROWTH_SKIP_SLOW is set")
        for it in items:
            if "slow" in it.keywords:
                it.add_marker(skip)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert."""
    import time
    t0 = time.perf_counter()

    def record(num, title, checks, budget_s):
        elapsed = time.perf_counter() - t0
        checks = dict(checks)
        checks["time"] = (elapsed <= budget_s, f"{elapsed:.1f}s <= {budget_s:g}s")
        ok = all(v[0] for v in checks.values())
        detail = "; ".join(f"{k}: {v[1]}" for k, v in checks.items())
        line = f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title} | {detail}"
        ACCEPTANCE_LINES.append((num, line))
        print(line)
        bad = [k for k, v in checks.items() if not v[0]]
        assert not bad, f"criterion {num} failed on: {', '.join(bad)}"
    return record
