import warnings

import numpy as np
import pytest

from fdoaloc.errors import DegeneratePairError, DimensionMismatchError, InvalidSystemError
from fdoaloc.geometry import (
    Emitter,
    FdoaMeasurement,
    ReceiverState,
    TdoaMeasurement,
    fdoa_forward,
    tdoa_forward,
)
from fdoaloc.systems import (
    BuilderWarning,
    GeoSystemSpec,
    TABLE1_MINIMUM,
    add_altitude_constraint,
    build_fdoa,
    build_fdoa_family,
    build_geo_system,
    build_tdoa,
    table1_minimum,
)

from conftest import random_scenario


def tdoa_scenario(seed, n=3, dimension=3, side=100.0):
    rng = np.random.default_rng(seed)
    truth = rng.uniform(-side / 2, side / 2, 3)
    if dimension == 2:
        truth[2] = 0.0

    def state(rxid):
        pos = rng.uniform(-side / 2, side / 2, 3)
        if dimension == 2:
            pos[2] = 0.0
        return ReceiverState(position=pos, velocity=[0, 0, 0], id=rxid, epoch=0)

    ref = state("ref")
    measurements = []
    for j in range(n):
        other = state(f"rx{j}")
        pair = (ref, other)
        measurements.append(TdoaMeasurement(pair=pair, value=tdoa_forward(truth, pair)))
    return truth, measurements


def combined_scenario(seed, n=1, dimension=3, side=100.0, vmax=2.0):
    rng = np.random.default_rng(seed)
    truth = rng.uniform(-side / 2, side / 2, 3)
    if dimension == 2:
        truth[2] = 0.0
    fdoa, tdoa = [], []
    for epoch in range(n):
        def state(rxid):
            pos = rng.uniform(-side / 2, side / 2, 3)
            vel = rng.uniform(-vmax, vmax, 3)
            if dimension == 2:
                pos[2] = 0.0
                vel[2] = 0.0
            return ReceiverState(position=pos, velocity=vel, id=rxid, epoch=epoch)
        a, b = state("rx1"), state("rx2")
        fdoa.append(FdoaMeasurement(pair=(a, b), value=fdoa_forward(truth, (a, b))))
        tdoa.append(TdoaMeasurement(pair=(a, b), value=tdoa_forward(truth, (a, b))))
    return truth, fdoa, tdoa


class TestBuildFdoa:
    def test_shape_three_epochs(self, scenario3):
        system = build_fdoa(scenario3.fdoa_measurements)
        assert system.n_unknowns == 9  # x, y, z + 6 ranges
        assert system.n_equations == 9

    def test_truth_is_root_after_scaling(self, scenario3):
        system = build_fdoa(scenario3.fdoa_measurements)
        concrete = system.bind_measurements(scenario3.fdoa_measurements)
        lifted = system.lifted_point(scenario3.truth)
        residual = np.abs(concrete.evaluate(lifted)).max()
        assert residual <= 1e-9

    def test_truth_root_many_scenarios(self):
        for seed in range(20):
            scn = random_scenario(seed, n_pairs=3)
            system = build_fdoa(scn.fdoa_measurements)
            concrete = system.bind_measurements(scn.fdoa_measurements)
            lifted = system.lifted_point(scn.truth)
            assert np.abs(concrete.evaluate(lifted)).max() <= 1e-9

    def test_bind_purity(self, scenario3):
        system = build_fdoa(scenario3.fdoa_measurements)
        p = system.parameter_values(scenario3.fdoa_measurements)
        c1 = system.bind(p).packed().coeffs
        c2 = system.bind(p).packed().coeffs
        assert np.array_equal(c1, c2)

    def test_zero_velocity_warnings(self):
        a = ReceiverState(position=[0, 0, 0], velocity=[0, 0, 0], epoch=0)
        b = ReceiverState(position=[5, 0, 0], velocity=[0, 0, 0], epoch=0)
        with pytest.warns(BuilderWarning, match="identically zero"):
            build_fdoa([FdoaMeasurement(pair=(a, b), value=0.0)])
        with pytest.warns(BuilderWarning, match="infeasible"):
            build_fdoa([FdoaMeasurement(pair=(a, b), value=1.0)])

    def test_duplicate_positions_rejected(self):
        a = ReceiverState(position=[1, 2, 3], velocity=[1, 0, 0], epoch=0)
        b = ReceiverState(position=[1, 2, 3], velocity=[0, 1, 0], epoch=0)
        with pytest.raises(DegeneratePairError):
            build_fdoa([FdoaMeasurement(pair=(a, b), value=0.5)])

    def test_below_minimum_warns_not_fails(self):
        scn = random_scenario(1, n_pairs=2)
        with pytest.warns(BuilderWarning, match="below the finiteness bound"):
            system = build_fdoa(scn.fdoa_measurements)
        assert system.n_equations == 6 and system.n_unknowns == 7

    def test_2d_requires_zero_z(self, scenario3):
        spec = GeoSystemSpec(mode="fdoa", dimension=2)
        with pytest.raises(DimensionMismatchError):
            build_fdoa(scenario3.fdoa_measurements, spec)


class TestBuildTdoa:
    def test_truth_is_root(self):
        truth, meas = tdoa_scenario(3, n=3)
        system = build_tdoa(meas)
        concrete = system.bind_measurements((), meas)
        lifted = system.lifted_point(truth)
        assert np.abs(concrete.evaluate(lifted)).max() <= 1e-9
        assert system.n_unknowns == 4  # x, y, z, reference range
        assert system.n_equations == 4

    def test_zero_tdoa_reduces_to_bisector_plane(self):
        # symmetric receivers, tau = 0: the measurement equation must be the
        # perpendicular bisector plane, linear part proportional to (x2 - x1)
        ref = ReceiverState(position=[-3, 1, 2], velocity=[0, 0, 0], epoch=0)
        other = ReceiverState(position=[3, -1, 0], velocity=[0, 0, 0], epoch=0)
        meas = TdoaMeasurement(pair=(ref, other), value=0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            system = build_tdoa([meas])
        concrete = system.bind_measurements((), [meas])
        eq = concrete.polynomials[0]
        coeff = {}
        for c, zex, _ in eq.terms:
            coeff[zex] = c
        direction = np.array([
            coeff.get((1, 0, 0, 0), 0), coeff.get((0, 1, 0, 0), 0),
            coeff.get((0, 0, 1, 0), 0),
        ]).real
        expected = other.position - ref.position
        cross = np.cross(direction, expected)
        assert np.linalg.norm(cross) <= 1e-12 * np.linalg.norm(direction) * np.linalg.norm(expected)
        # tau = 0 also kills the range-unknown term
        assert coeff.get((0, 0, 0, 1), 0) == 0

    def test_common_reference_required(self):
        truth, meas = tdoa_scenario(5, n=2)
        rogue_ref = ReceiverState(position=[9, 9, 9], velocity=[0, 0, 0], epoch=0)
        rogue = TdoaMeasurement(
            pair=(rogue_ref, meas[0].pair[1]), value=0.0
        )
        with pytest.raises(InvalidSystemError, match="reference"):
            build_tdoa([meas[0], rogue])


class TestCombinedAndAltitude:
    def test_combined_truth_root(self):
        truth, fdoa, tdoa = combined_scenario(11, n=1)
        system = build_geo_system(fdoa, tdoa)
        concrete = system.bind_measurements(fdoa, tdoa)
        lifted = system.lifted_point(truth)
        assert np.abs(concrete.evaluate(lifted)).max() <= 1e-9

    def test_flat_altitude_keeps_truth_root(self, scenario3):
        system = build_fdoa(scenario3.fdoa_measurements)
        system = add_altitude_constraint(system, float(scenario3.truth.position[2]))
        concrete = system.bind_measurements(scenario3.fdoa_measurements)
        lifted = system.lifted_point(scenario3.truth)
        assert np.abs(concrete.evaluate(lifted)).max() <= 1e-9
        assert system.n_equations == 10

    def test_sphere_altitude_keeps_truth_root(self, scenario3):
        radius = float(np.linalg.norm(scenario3.truth.position))
        system = build_fdoa(scenario3.fdoa_measurements)
        system = add_altitude_constraint(system, radius, kind="sphere")
        concrete = system.bind_measurements(scenario3.fdoa_measurements)
        lifted = system.lifted_point(scenario3.truth)
        assert np.abs(concrete.evaluate(lifted)).max() <= 1e-9

    def test_2d_altitude_rejected(self):
        truth, fdoa, tdoa = combined_scenario(13, n=1, dimension=2)
        spec = GeoSystemSpec(mode="fdoa", dimension=2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            system = build_fdoa(fdoa, spec)
        with pytest.raises(InvalidSystemError):
            add_altitude_constraint(system, 10.0)


class TestSquareness:
    """Every minimum-count cell must produce a square system."""

    def build_cell(self, mode, dimension, altitude, m, seed=0):
        if mode == "fdoa":
            scn = random_scenario(seed, n_pairs=m)
            meas = scn.fdoa_measurements
            if dimension == 2:
                flat = []
                rng = np.random.default_rng(seed)
                truth = rng.uniform(-50, 50, 3)
                truth[2] = 0
                for epoch in range(m):
                    a = ReceiverState(
                        position=list(rng.uniform(-50, 50, 2)) + [0.0],
                        velocity=list(rng.uniform(-2, 2, 2)) + [0.0],
                        epoch=epoch,
                    )
                    b = ReceiverState(
                        position=list(rng.uniform(-50, 50, 2)) + [0.0],
                        velocity=list(rng.uniform(-2, 2, 2)) + [0.0],
                        epoch=epoch,
                    )
                    flat.append(FdoaMeasurement(pair=(a, b), value=fdoa_forward(truth, (a, b))))
                meas = flat
            spec = GeoSystemSpec(mode="fdoa", dimension=dimension)
            system = build_fdoa(meas, spec)
            args = (meas, ())
        elif mode == "tdoa":
            truth, meas = tdoa_scenario(seed, n=m, dimension=dimension)
            spec = GeoSystemSpec(mode="tdoa", dimension=dimension)
            system = build_tdoa(meas, spec)
            args = ((), meas)
        else:
            truth, fdoa, tdoa = combined_scenario(seed, n=m, dimension=dimension)
            spec = GeoSystemSpec(mode=mode, dimension=dimension)
            system = build_geo_system(fdoa, tdoa, spec)
            args = (fdoa, tdoa)
        if altitude:
            system = add_altitude_constraint(system, 0.0)
        return system

    @pytest.mark.parametrize("cell,minimum", sorted(TABLE1_MINIMUM.items()))
    def test_minimum_is_square(self, cell, minimum):
        mode, dimension, altitude = cell
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            system = self.build_cell(mode, dimension, altitude, minimum)
        if cell == ("tdoa+fdoa", 3, False):
            # consistent but overdetermined: one more equation than unknowns
            assert system.n_equations == system.n_unknowns + 1
        else:
            assert system.n_equations == system.n_unknowns

    def test_undefined_cell_raises(self):
        with pytest.raises(InvalidSystemError):
            table1_minimum("tdoa", 2, altitude=True)


class TestStructuralFamily:
    def test_family_matches_concrete_build(self, scenario3):
        family = build_fdoa_family(3)
        meas = scenario3.fdoa_measurements
        p = family.parameter_values(meas)
        bound = family.bind(p)
        direct = build_fdoa(meas).bind_measurements(meas)
        lifted = family.lifted_point(
            scenario3.truth, states=family.slot_states(meas)
        )
        assert np.abs(bound.normalized().evaluate(lifted)).max() <= 1e-9
        assert np.abs(direct.evaluate(lifted)).max() <= 1e-9

    def test_signature_mismatch_rejected(self, scenario3):
        family = build_fdoa_family(3)
        with pytest.raises(InvalidSystemError, match="signature"):
            family.parameter_values(scenario3.fdoa_measurements[:2])
