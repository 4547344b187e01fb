import numpy as np
import pytest

from fdoaloc.geometry import Emitter, FdoaMeasurement, ReceiverState, Scenario, fdoa_forward


def random_scenario(seed, n_pairs=3, side=100.0, vmax=2.0):
    """Noiseless FDOA scenario with one pair per epoch, truth attached."""
    rng = np.random.default_rng(seed)
    truth = rng.uniform(-side / 2, side / 2, 3)
    measurements = []
    for epoch in range(n_pairs):
        a = ReceiverState(
            position=rng.uniform(-side / 2, side / 2, 3),
            velocity=rng.uniform(-vmax, vmax, 3),
            id="rx1", epoch=epoch,
        )
        b = ReceiverState(
            position=rng.uniform(-side / 2, side / 2, 3),
            velocity=rng.uniform(-vmax, vmax, 3),
            id="rx2", epoch=epoch,
        )
        measurements.append(FdoaMeasurement(pair=(a, b), value=fdoa_forward(truth, (a, b))))
    return Scenario(measurements=tuple(measurements), truth=Emitter(truth), rng_seed=seed)


@pytest.fixture
def scenario3():
    return random_scenario(42, n_pairs=3)


@pytest.fixture
def scenario40():
    return random_scenario(7, n_pairs=40)
