import numpy as np
import pytest

from quasirot.embedding import EmbeddingConfig, build_delay_cloud
from quasirot.lift import ContinuationParams, continue_lift, pilot_delta
from quasirot.projections import FISH, FLOWER, angle_from_reference, eval_fourier
from quasirot.torus import rigid_orbit

from helpers import GOLDEN


class PlanarCase:
    def __init__(self, curve, ref, n, K=7):
        self.theta = rigid_orbit(GOLDEN, 0.0, n - 1)[:, 0]
        self.points = eval_fourier(curve, self.theta)
        self.phi = angle_from_reference(self.points, ref)
        self.cloud = build_delay_cloud(self.phi, EmbeddingConfig(K=K))
        self.delta, self.eps = pilot_delta(self.cloud)
        self.lift = continue_lift(self.cloud, ContinuationParams(delta=self.delta))


@pytest.fixture(scope="session")
def fish_case():
    return PlanarCase(FISH, (8.25, 4.4), 100_000)


@pytest.fixture(scope="session")
def flower_case():
    return PlanarCase(FLOWER, (0.5, 1.5), 100_000)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
