import numpy as np
import pytest

from fdoaloc.polynomials import total_degree
from fdoaloc.systems import build_fdoa_family
from fdoaloc.tracking import ParameterHomotopy, parameter_solve, solve

from conftest import random_scenario


def set_distance(A, B):
    """Max over each set of the distance to the nearest point of the other."""
    worst = 0.0
    for pts, other in ((A, B), (B, A)):
        for p in pts:
            worst = max(worst, float(np.linalg.norm(other - p, axis=1).min()))
    return worst


@pytest.fixture(scope="module")
def family():
    return build_fdoa_family(3)


@pytest.fixture(scope="module")
def hom(family):
    scn = random_scenario(42, n_pairs=3)
    p = family.parameter_values(scn.fdoa_measurements)
    scale = 1.0 + np.abs(p)
    return ParameterHomotopy(family, seed=17, p0_scale=scale.real)


class TestParameterHomotopy:
    def test_tracking_to_p0_returns_basis(self, hom):
        result = hom.track_to(hom.p0)
        assert result.distinct_solutions.shape[0] == hom.generic_root_count
        assert set_distance(result.distinct_solutions, hom.basis) <= 1e-8

    def test_matches_fresh_solves_on_real_targets(self, family, hom):
        for seed in range(5):
            scn = random_scenario(100 + seed, n_pairs=3)
            p = family.parameter_values(scn.fdoa_measurements)
            via_family = hom.track_to(p)
            fresh = solve(family.bind(p).normalized(), seed=200 + seed)
            assert set_distance(
                via_family.distinct_solutions, fresh.distinct_solutions
            ) <= 1e-6

    def test_path_count_is_generic_count(self, family, hom):
        scn = random_scenario(300, n_pairs=3)
        p = family.parameter_values(scn.fdoa_measurements)
        result = hom.track_to(p)
        bezout = total_degree(family.bind(p))
        assert len(result.paths) == hom.generic_root_count
        assert hom.generic_root_count < bezout
        assert result.distinct_solutions.shape[0] <= hom.generic_root_count


class TestParameterSolve:
    def test_counts_never_exceed_generic(self, family):
        targets = []
        for seed in range(3):
            scn = random_scenario(400 + seed, n_pairs=3)
            targets.append(family.parameter_values(scn.fdoa_measurements))
        results = parameter_solve(family, targets, seed=9)
        counts = [r.distinct_solutions.shape[0] for r in results]
        assert len(results) == 3
        assert all(c <= len(results[0].paths) for c in counts)
