import pytest

from searchpeers.peer_metrics import compute_exposures
from searchpeers.synth import Calibration, DgpSpec, generate_panel

DESK_SEED = 7


def small_calibration(n_degrees=150, **kw):
    return Calibration(n_degrees=n_degrees, **kw)


@pytest.fixture(scope="session")
def small_panel():
    return compute_exposures(generate_panel(DgpSpec(), small_calibration(), seed=1))


@pytest.fixture(scope="session")
def desk_panel():
    """Desk-scale panel (1,572 degrees x 5 cohorts) with exposures attached."""
    return compute_exposures(generate_panel(DgpSpec(), Calibration(), seed=DESK_SEED))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[cid])
