"""Shared fixtures: the packaged instances plus a tiny economy builder."""

from __future__ import annotations

import numpy as np
import pytest

from cutoffbounds import Economy
from cutoffbounds.presets import (
    golden_sd,
    rigged_wpo,
    strategic_showcase_design,
)


@pytest.fixture(scope="session")
def golden():
    return golden_sd()


@pytest.fixture(scope="session")
def rigged():
    return rigged_wpo()


@pytest.fixture(scope="session")
def showcase():
    return strategic_showcase_design()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one PASS/FAIL line per acceptance criterion.

    Lines surface in the terminal summary regardless of output capture, so
    the verdicts read off a full run in one block.
    """

    def _log(criterion: str, passed: bool, detail: str) -> None:
        verdict = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"{criterion}: {verdict} — {detail}")

    return _log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def build_sd_economy():
    """Factory for one-score economies given raw scores and submitted lists."""

    def _build(scores, reports, capacities, list_cap=None):
        cols = np.asarray(scores, dtype=float).reshape(-1, 1)
        n_schools = len(capacities)
        cap = list_cap if list_cap is not None else max(len(r) for r in reports)
        return Economy(
            n_schools=n_schools,
            list_cap=cap,
            capacities=tuple(capacities),
            score_groups=(0,) * n_schools,
            score_cols=cols,
            reports=tuple(tuple(r) for r in reports),
        )

    return _build
