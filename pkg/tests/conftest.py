from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from hmab.model import ArmParams, Kind

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

prob = st.floats(0.0, 1.0, allow_nan=False)
belief = prob


@st.composite
def arms(draw, kind=None, ordered=False):
    """Arbitrary valid arm; ``ordered`` enforces eta0 < r0 < eta1 < r1."""
    if ordered:
        vals = sorted(draw(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4, unique=True)))
        eta0, r0, eta1, r1 = vals
    else:
        r0, r1, eta0, eta1 = (draw(prob) for _ in range(4))
    theta = ((draw(prob), draw(prob)), (draw(prob), draw(prob)))
    k = draw(st.sampled_from(list(Kind))) if kind is None else kind
    return ArmParams(draw(prob), draw(prob), r0, r1, eta0, eta1, theta=theta, kind=k)


def random_rested_arm(rng: np.random.Generator, min_gap: float = 0.02) -> ArmParams:
    """Rested arm with strictly ordered rewards and rest-while-unavailable probability 0."""
    while True:
        eta0, r0, eta1, r1 = np.sort(rng.uniform(0.0, 1.0, 4))
        if np.all(np.diff([eta0, r0, eta1, r1]) > min_gap):
            break
    mu0, mu1 = rng.uniform(0.0, 1.0, 2)
    th = rng.uniform(0.0, 1.0, (2, 2))
    th[0, 0] = 0.0
    return ArmParams(mu0, mu1, r0, r1, eta0, eta1, theta=th, kind=Kind.RESTED)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_criterion():
    def emit(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
