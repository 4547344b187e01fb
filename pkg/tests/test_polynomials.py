import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdoaloc.errors import DimensionMismatchError, InvalidSystemError
from fdoaloc.polynomials import (
    ConcreteSystem,
    Monomial,
    ParameterizedSystem,
    Polynomial,
    total_degree,
)


def poly_1var(*coeffs):
    """coeffs[k] multiplies z^k (single unknown, no parameters)."""
    terms = [(c, (k,), ()) for k, c in enumerate(coeffs)]
    return Polynomial(1, 0, terms)


def random_polynomial(rng, n_vars=4, max_degree=3, n_terms=20):
    terms = []
    for _ in range(n_terms):
        exps = [0] * n_vars
        for _ in range(max_degree):
            if rng.uniform() < 0.7:
                exps[rng.integers(n_vars)] += 1
        c = complex(rng.standard_normal(), rng.standard_normal())
        terms.append((c, tuple(exps), ()))
    return Polynomial(n_vars, 0, terms)


class TestEvaluate:
    def test_root_of_start_factor(self):
        sys1 = ConcreteSystem([poly_1var(-1, 0, 1)], ["z1"])  # z^2 - 1
        assert sys1.evaluate([1.0])[0] == 0

    def test_direct_arithmetic(self):
        sys1 = ConcreteSystem([poly_1var(-1, 0, 1)], ["z1"])
        assert sys1.evaluate([2.0])[0] == 3

    def test_against_extended_precision(self):
        rng = np.random.default_rng(5)
        with mpmath.workdps(60):
            for _ in range(20):
                poly = random_polynomial(rng)
                z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
                value = poly.evaluate(z)
                exact = mpmath.mpc(0)
                for c, zex, _ in poly.terms:
                    term = mpmath.mpc(c)
                    for j, e in enumerate(zex):
                        term *= mpmath.mpc(z[j]) ** e
                    exact += term
                err = abs(value - complex(exact))
                assert err <= 1e-13 * max(1.0, abs(complex(exact)))

    def test_dimension_mismatch(self):
        sys1 = ConcreteSystem([poly_1var(-1, 0, 1)], ["z1"])
        with pytest.raises(DimensionMismatchError):
            sys1.evaluate([1.0, 2.0])

    @given(
        a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
        b=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=50, deadline=None)
    def test_linear_in_coefficients(self, a, b, seed):
        rng = np.random.default_rng(seed)
        f = random_polynomial(rng, n_terms=8)
        g = random_polynomial(rng, n_terms=8)
        z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        combo = Polynomial(
            4, 0,
            [(a * c, zx, px) for c, zx, px in f.terms]
            + [(b * c, zx, px) for c, zx, px in g.terms],
        )
        lhs = combo.evaluate(z)
        rhs = a * f.evaluate(z) + b * g.evaluate(z)
        scale = max(1.0, abs(lhs), abs(rhs))
        assert abs(lhs - rhs) <= 1e-12 * scale


class TestJacobian:
    def test_quadratic_derivative(self):
        sys1 = ConcreteSystem([poly_1var(-1, 0, 1)], ["z1"])
        assert sys1.jacobian([3.0])[0, 0] == 6.0

    def test_linear_system_constant_jacobian(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((3, 3))
        polys = []
        for i in range(3):
            terms = [(A[i, j], tuple(1 if k == j else 0 for k in range(3)), ())
                     for j in range(3)]
            polys.append(Polynomial(3, 0, terms))
        system = ConcreteSystem(polys, ["x", "y", "z"])
        J1 = system.jacobian(rng.standard_normal(3))
        J2 = system.jacobian(rng.standard_normal(3))
        assert np.allclose(J1, A) and np.allclose(J2, A)

    def test_against_finite_differences(self):
        rng = np.random.default_rng(17)
        h = 1e-7
        for _ in range(20):
            polys = [random_polynomial(rng, n_terms=10) for _ in range(3)]
            system = ConcreteSystem(
                [Polynomial(4, 0, p.terms) for p in polys], list("wxyz")
            )
            z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            J = system.jacobian(z)
            for col in range(4):
                dz = np.zeros(4, dtype=complex)
                dz[col] = h
                fd = (system.evaluate(z + dz) - system.evaluate(z - dz)) / (2 * h)
                for row in range(3):
                    if abs(J[row, col]) > 1e-8:
                        assert abs(fd[row] - J[row, col]) <= 1e-5 * abs(J[row, col])


class TestTotalDegree:
    def test_three_quadrics(self):
        polys = []
        for i in range(3):
            lead = [0, 0, 0]
            lead[i] = 2
            polys.append(Polynomial(3, 0, [(1.0, tuple(lead), ()), (-1.0, (0, 0, 0), ())]))
        assert total_degree(ConcreteSystem(polys, ["a", "b", "c"])) == 8

    def test_single_linear(self):
        p = Polynomial(1, 0, [(2.0, (1,), ()), (1.0, (0,), ())])
        assert total_degree(ConcreteSystem([p], ["z"])) == 1

    def test_zero_degree_equation_rejected(self):
        p = Polynomial(1, 0, [(1.0, (0,), ())])
        with pytest.raises(InvalidSystemError):
            total_degree(ConcreteSystem([p], ["z"]))

    def test_matches_term_list_degrees(self, scenario3):
        from fdoaloc.systems import build_fdoa
        system = build_fdoa(scenario3.fdoa_measurements)
        concrete = system.bind_measurements(scenario3.fdoa_measurements)
        per_eq = []
        for poly in concrete.polynomials:
            per_eq.append(max(sum(zx) for _, zx, _ in poly.terms))
        expected = 1
        for d in per_eq:
            expected *= d
        assert total_degree(concrete) == expected == 2**9


class TestParameterBinding:
    def make_family(self):
        # f(z; p) = p1*z^2 + p2^2*z - 3
        terms = [
            (1.0, (2,), (1, 0)),
            (1.0, (1,), (0, 2)),
            (-3.0, (0,), (0, 0)),
        ]
        return ParameterizedSystem([Polynomial(1, 2, terms)], ["z"], ["p1", "p2"])

    def test_bind_then_evaluate_matches_direct_substitution(self):
        family = self.make_family()
        rng = np.random.default_rng(2)
        for _ in range(20):
            p = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            z = complex(rng.standard_normal(), rng.standard_normal())
            bound = family.bind(p)
            via_bind = bound.evaluate([z])[0]
            direct = p[0] * z**2 + p[1] ** 2 * z - 3
            assert abs(via_bind - direct) <= 1e-12 * max(1.0, abs(direct))

    def test_bind_purity_bit_for_bit(self):
        family = self.make_family()
        p = np.array([1.25 + 0.5j, -0.75 + 2.0j])
        c1 = family.bind(p).packed().coeffs
        c2 = family.bind(p).packed().coeffs
        assert np.array_equal(c1, c2)

    def test_unreferenced_parameter_rejected(self):
        terms = [(1.0, (1,), (1, 0)), (1.0, (0,), (0, 0))]
        with pytest.raises(InvalidSystemError):
            ParameterizedSystem([Polynomial(1, 2, terms)], ["z"], ["p1", "p2"])

    def test_bind_by_name(self):
        family = self.make_family()
        c1 = family.bind({"p1": 2.0, "p2": 3.0})
        c2 = family.bind([2.0, 3.0])
        assert np.array_equal(c1.packed().coeffs, c2.packed().coeffs)


class TestRepresentation:
    def test_monomial_degree(self):
        assert Monomial((1, 0, 3)).degree == 4
        with pytest.raises(ValueError):
            Monomial((-1, 0))

    def test_terms_merge_and_drop_zeros(self):
        p = Polynomial(2, 0, [
            (1.0, (1, 0), ()), (2.0, (1, 0), ()), (5.0, (0, 1), ()),
            (-5.0, (0, 1), ()),
        ])
        assert len(p.terms) == 1
        assert p.terms[0][0] == 3.0

    def test_dump_graded_lex(self):
        p = Polynomial(2, 0, [
            (1.0, (0, 0), ()), (2.0, (2, 0), ()), (3.0, (1, 1), ()),
            (4.0, (0, 1), ()),
        ])
        text = p.format(["x", "y"])
        # higher-degree terms first, lexicographic within a degree
        assert text.index("x^2") < text.index("x*y") < text.index("y")

    def test_diff_drops_constants(self):
        p = poly_1var(5.0, 2.0, 3.0)  # 3z^2 + 2z + 5
        dp = p.diff(0)
        assert dp.evaluate([2.0]) == pytest.approx(14.0)
        assert dp.degree() == 1
