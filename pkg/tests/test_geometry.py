import mpmath
import numpy as np
import pytest

from fdoaloc.errors import SingularGeometryError
from fdoaloc.geometry import (
    SPEED_OF_LIGHT,
    Emitter,
    FdoaMeasurement,
    ReceiverState,
    Scenario,
    fdoa_forward,
    make_pair,
    tdoa_forward,
)

from conftest import random_scenario


def pair_at(pos_a, vel_a, pos_b, vel_b, epoch=0):
    return (
        ReceiverState(position=pos_a, velocity=vel_a, epoch=epoch),
        ReceiverState(position=pos_b, velocity=vel_b, epoch=epoch),
    )


def random_pair(rng, side=100.0, vmax=2.0, epoch=0):
    return pair_at(
        rng.uniform(-side / 2, side / 2, 3), rng.uniform(-vmax, vmax, 3),
        rng.uniform(-side / 2, side / 2, 3), rng.uniform(-vmax, vmax, 3),
        epoch=epoch,
    )


class TestFdoaForward:
    def test_zero_velocities_give_zero(self):
        pair = pair_at([10, 0, 0], [0, 0, 0], [0, 10, 0], [0, 0, 0])
        assert fdoa_forward([1, 2, 3], pair) == 0.0

    def test_aligned_unit_geometry(self):
        # moving receiver recedes along the line of sight at 1 m/s,
        # reference receiver is still
        pair = pair_at([0, 5, 0], [0, 0, 0], [1, 0, 0], [1, 0, 0])
        value = fdoa_forward([0, 0, 0], pair)
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_matches_range_rate_finite_difference(self):
        # value must equal d/dt(|x_b - x| - |x_a - x|) under receiver motion
        rng = np.random.default_rng(123)
        h = 1e-6
        for _ in range(50):
            a, b = random_pair(rng)
            x = rng.uniform(-50, 50, 3)
            def range_diff(t):
                pa = a.position + t * a.velocity
                pb = b.position + t * b.velocity
                return np.linalg.norm(pb - x) - np.linalg.norm(pa - x)
            oracle = (range_diff(h) - range_diff(-h)) / (2 * h)
            value = fdoa_forward(x, (a, b))
            assert value == pytest.approx(oracle, rel=1e-6, abs=1e-9)

    def test_coincident_emitter_raises(self):
        pair = pair_at([1, 2, 3], [1, 0, 0], [4, 5, 6], [0, 1, 0])
        with pytest.raises(SingularGeometryError):
            fdoa_forward([1, 2, 3], pair)

    def test_translation_invariance(self):
        rng = np.random.default_rng(7)
        a, b = random_pair(rng)
        x = rng.uniform(-50, 50, 3)
        base = fdoa_forward(x, (a, b))
        for _ in range(100):
            shift = rng.uniform(-1e3, 1e3, 3)
            a2 = ReceiverState(position=a.position + shift, velocity=a.velocity)
            b2 = ReceiverState(position=b.position + shift, velocity=b.velocity)
            shifted = fdoa_forward(x + shift, (a2, b2))
            assert shifted == pytest.approx(base, rel=1e-12, abs=1e-12)

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(8)
        a, b = random_pair(rng)
        x = rng.uniform(-50, 50, 3)
        base = fdoa_forward(x, (a, b))
        for _ in range(20):
            q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
            if np.linalg.det(q) < 0:
                q[:, 0] = -q[:, 0]
            a2 = ReceiverState(position=q @ a.position, velocity=q @ a.velocity)
            b2 = ReceiverState(position=q @ b.position, velocity=q @ b.velocity)
            rotated = fdoa_forward(q @ x, (a2, b2))
            assert rotated == pytest.approx(base, rel=1e-10, abs=1e-10)

    def test_speed_sum_bound_holds_everywhere(self):
        # |f| <= |v_a| + |v_b| for noiseless values
        rng = np.random.default_rng(99)
        for _ in range(10_000):
            a, b = random_pair(rng)
            x = rng.uniform(-50, 50, 3)
            value = fdoa_forward(x, (a, b))
            assert abs(value) <= a.speed() + b.speed() + 1e-12


class TestTdoaForward:
    def test_equidistant_is_zero(self):
        pair = pair_at([10, 0, 0], [0, 0, 0], [-10, 0, 0], [0, 0, 0])
        assert tdoa_forward([0, 5, 0], pair) == pytest.approx(0.0, abs=1e-18)

    def test_one_second_difference(self):
        c = SPEED_OF_LIGHT
        pair = pair_at([c, 0, 0], [0, 0, 0], [2 * c, 0, 0], [0, 0, 0])
        assert tdoa_forward([0, 0, 0], pair) == pytest.approx(1.0, rel=1e-12)

    def test_matches_extended_precision(self):
        rng = np.random.default_rng(11)
        with mpmath.workdps(50):
            for _ in range(50):
                a, b = random_pair(rng)
                x = rng.uniform(-50, 50, 3)
                def mpnorm(v):
                    return mpmath.sqrt(mpmath.fsum(mpmath.mpf(t) ** 2 for t in v))
                oracle = (mpnorm(b.position - x) - mpnorm(a.position - x)) / SPEED_OF_LIGHT
                value = tdoa_forward(x, (a, b))
                assert abs(value - float(oracle)) <= 1e-12 * abs(float(oracle)) + 1e-24


class TestTypes:
    def test_pair_epochs_must_match(self):
        a = ReceiverState(position=[0, 0, 0], velocity=[1, 0, 0], epoch=0)
        b = ReceiverState(position=[1, 0, 0], velocity=[0, 1, 0], epoch=1)
        with pytest.raises(ValueError):
            FdoaMeasurement(pair=(a, b), value=0.0)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            ReceiverState(position=[np.nan, 0, 0], velocity=[0, 0, 0])
        pair = pair_at([0, 0, 0], [1, 0, 0], [1, 1, 1], [0, 0, 0])
        with pytest.raises(ValueError):
            FdoaMeasurement(pair=pair, value=float("inf"))

    def test_positions_read_only(self):
        s = ReceiverState(position=[1, 2, 3], velocity=[0, 0, 0])
        with pytest.raises(ValueError):
            s.position[0] = 5.0

    def test_scenario_needs_measurements(self):
        with pytest.raises(ValueError):
            Scenario(measurements=())

    def test_make_pair_rejects_duplicate_positions(self):
        from fdoaloc.errors import DegeneratePairError
        with pytest.raises(DegeneratePairError):
            make_pair([1, 2, 3], [1, 0, 0], [1, 2, 3], [0, 1, 0])

    def test_scenario_measurement_filters(self):
        scn = random_scenario(3, n_pairs=4)
        assert len(scn.fdoa_measurements) == 4
        assert len(scn.tdoa_measurements) == 0
        assert isinstance(scn.truth, Emitter)
