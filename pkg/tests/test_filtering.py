import numpy as np
import pytest

from fdoaloc.filtering import (
    REJECT_COMPLEX,
    REJECT_FDOA_BOUND,
    REJECT_NONPOSITIVE_RANGE,
    REJECT_RANGE_INCONSISTENT,
    FeasibleCandidate,
    Rejection,
    extract_real,
    fdoa_bound_check,
    feasibility_gate,
    feasible_candidates,
    gate_measurements,
)
from fdoaloc.geometry import FdoaMeasurement, ReceiverState, fdoa_forward
from fdoaloc.systems import build_fdoa
from fdoaloc.tracking import solve

from conftest import random_scenario


class TestExtractReal:
    def test_real_kept(self):
        reals, idx = extract_real([np.array([1 + 0j, 2 + 0j])])
        assert list(idx) == [0]
        assert np.array_equal(reals[0], [1.0, 2.0])

    def test_complex_dropped(self):
        _, idx = extract_real([np.array([1 + 0.5j, 2 + 0j])])
        assert len(idx) == 0

    def test_boundary_is_relative_to_endpoint_scale(self):
        # same imaginary magnitude: kept at unit scale, dropped at tiny scale
        unit = np.array([1.0 + 1e-7j, 1.0 + 0j])
        tiny = np.array([1e-9 + 1e-7j, 1e-9 + 0j])
        _, idx_unit = extract_real([unit])
        _, idx_tiny = extract_real([tiny])
        assert list(idx_unit) == [0]
        assert len(idx_tiny) == 0


class TestFeasibilityGate:
    def setup_method(self):
        self.scenario = random_scenario(12, n_pairs=3)
        self.system = build_fdoa(self.scenario.fdoa_measurements)
        self.truth_vec = self.system.lifted_point(self.scenario.truth)

    def test_true_root_accepted(self):
        out = feasibility_gate(self.truth_vec, self.system.layout)
        assert isinstance(out, FeasibleCandidate)
        assert np.allclose(out.emitter, self.scenario.truth.position)
        assert (out.ranges > 0).all()

    def test_zero_reference_range_rejected(self):
        bad = self.truth_vec.copy()
        bad[3] = 0.0
        out = feasibility_gate(bad, self.system.layout)
        assert isinstance(out, Rejection)
        assert out.reason == REJECT_NONPOSITIVE_RANGE

    def test_below_floor_rejected(self):
        bad = self.truth_vec.copy()
        bad[4] = 1e-7  # under the 1e-6 m floor
        out = feasibility_gate(bad, self.system.layout)
        assert out.reason == REJECT_NONPOSITIVE_RANGE

    def test_range_mismatch_rejected(self):
        bad = self.truth_vec.copy()
        bad[5] += 1.0  # one meter off at ~100 m scale
        out = feasibility_gate(bad, self.system.layout)
        assert isinstance(out, Rejection)
        assert out.reason == REJECT_RANGE_INCONSISTENT

    def test_gate_soundness_on_noiseless_scenarios(self):
        for seed in range(10):
            scn = random_scenario(seed, n_pairs=3)
            system = build_fdoa(scn.fdoa_measurements)
            out = feasibility_gate(system.lifted_point(scn.truth), system.layout)
            assert isinstance(out, FeasibleCandidate)

    def test_candidates_allow_forward_prediction(self):
        # every gate survivor must have strictly positive ranges, so the
        # forward model is defined for all measurements
        scn = self.scenario
        concrete = self.system.bind_measurements(scn.fdoa_measurements)
        result = solve(concrete, seed=8)
        candidates, _ = feasible_candidates(result, self.system)
        assert candidates
        for cand in candidates:
            for m in scn.fdoa_measurements:
                value = fdoa_forward(cand.emitter, m.pair)
                assert np.isfinite(value)


class TestFdoaBound:
    def make_measurement(self, value, va=(1, 0, 0), vb=(0, 2, 0)):
        a = ReceiverState(position=[0, 0, 0], velocity=va, epoch=0)
        b = ReceiverState(position=[10, 0, 0], velocity=vb, epoch=0)
        return FdoaMeasurement(pair=(a, b), value=value)

    def test_exceeding_bound(self):
        assert fdoa_bound_check(self.make_measurement(3.5)) is False

    def test_boundary_attained(self):
        assert fdoa_bound_check(self.make_measurement(-3.0)) is True

    def test_slack(self):
        assert fdoa_bound_check(self.make_measurement(3.2), slack=0.5) is True

    def test_noiseless_forward_values_always_pass(self):
        rng = np.random.default_rng(31)
        checked = 0
        while checked < 10_000:
            scn = random_scenario(int(rng.integers(2**31)), n_pairs=40)
            for m in scn.fdoa_measurements:
                assert fdoa_bound_check(m)
            checked += len(scn.fdoa_measurements)

    def test_gate_measurements_reports_reason(self):
        good = self.make_measurement(2.0)
        bad = self.make_measurement(4.0)
        keep, rejections = gate_measurements([good, bad])
        assert list(keep) == [0]
        assert rejections[0].reason == REJECT_FDOA_BOUND
        assert rejections[0].provenance == 1


class TestPipeline:
    def test_noiseless_pipeline_reports_reasons(self):
        scn = random_scenario(3, n_pairs=3)
        system = build_fdoa(scn.fdoa_measurements)
        concrete = system.bind_measurements(scn.fdoa_measurements)
        result = solve(concrete, seed=6)
        candidates, rejections = feasible_candidates(result, system)
        assert len(candidates) >= 1
        best = min(
            np.linalg.norm(c.emitter - scn.truth.position) for c in candidates
        )
        assert best <= 1e-6
        reasons = {r.reason for r in rejections}
        assert reasons <= {
            REJECT_COMPLEX, REJECT_NONPOSITIVE_RANGE, REJECT_RANGE_INCONSISTENT,
        }
        assert len(candidates) + len(rejections) == result.distinct_solutions.shape[0]
