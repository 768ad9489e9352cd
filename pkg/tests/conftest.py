import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from s6vldp.height_core import HeightField, Region

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# hand-built 8x8 step field (M = N = 7); keys are heights, values face centres
_LEVELS = {
    0: [(x + 0.5, 0.5) for x in range(8)]
    + [(4.5, 1.5), (5.5, 1.5), (6.5, 1.5), (7.5, 1.5), (5.5, 2.5), (6.5, 2.5), (7.5, 2.5), (6.5, 3.5), (7.5, 3.5)],
    1: [(x + 0.5, 1.5) for x in range(4)]
    + [(4.5, 2.5), (5.5, 3.5), (6.5, 4.5), (7.5, 4.5), (6.5, 5.5), (7.5, 5.5), (7.5, 6.5), (7.5, 7.5)],
    2: [(x + 0.5, 2.5) for x in range(4)]
    + [(3.5, 3.5), (4.5, 3.5), (5.5, 4.5), (5.5, 5.5), (5.5, 6.5), (6.5, 6.5), (5.5, 7.5), (6.5, 7.5)],
    3: [(0.5, 3.5), (1.5, 3.5), (2.5, 3.5), (2.5, 4.5), (3.5, 4.5), (4.5, 4.5), (3.5, 5.5), (4.5, 5.5), (4.5, 6.5), (4.5, 7.5)],
    4: [(0.5, 4.5), (1.5, 4.5), (1.5, 5.5), (2.5, 5.5), (2.5, 6.5), (3.5, 6.5), (3.5, 7.5)],
    5: [(0.5, 5.5), (1.5, 6.5), (2.5, 7.5)],
    6: [(0.5, 6.5), (1.5, 7.5)],
    7: [(0.5, 7.5)],
}

REGION_FACES = [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (3, 4), (3, 5), (4, 4), (4, 5), (5, 3), (5, 4), (5, 5)]


def build_reference_field() -> HeightField:
    v = np.full((8, 8), -1, dtype=np.int64)
    for h, centres in _LEVELS.items():
        for X, Y in centres:
            i, j = int(X - 0.5), int(Y - 0.5)
            assert v[i, j] == -1, (X, Y)
            v[i, j] = h
    assert (v >= 0).all()
    return HeightField(v)


@pytest.fixture(scope="session")
def reference_field() -> HeightField:
    return build_reference_field()


@pytest.fixture(scope="session")
def reference_region() -> Region:
    return Region.from_faces(REGION_FACES, (8, 8))


@pytest.fixture(scope="session")
def half_rate():
    """Tabulated rate and Phi at a = q = 1/2, alpha = 1; shared because it takes ~15 s."""
    from s6vldp.rate_functions import RateParams, phi_minus, tabulate_F

    P = RateParams(0.5, 0.5, 1.0)
    table = tabulate_F(P)
    return P, table, phi_minus(P, table)


# -- acceptance summary ---------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
