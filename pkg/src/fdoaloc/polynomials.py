"""Sparse multivariate polynomials over complex coefficients.

Just enough infrastructure for the geolocation systems: term-list
representation, evaluation, symbolic differentiation, parameter binding.
Coefficients may depend polynomially on named parameters; binding folds
them into plain complex numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatchError, InvalidSystemError


@dataclass(frozen=True)
class Monomial:
    """Exponent vector of a single product of unknowns."""

    exponents: Tuple[int, ...]

    def __post_init__(self):
        if any(e < 0 for e in self.exponents):
            raise ValueError("exponents must be non-negative")
        object.__setattr__(self, "exponents", tuple(int(e) for e in self.exponents))

    @property
    def degree(self) -> int:
        return sum(self.exponents)


# A term is (coefficient, unknown exponents, parameter exponents).
Term = Tuple[complex, Tuple[int, ...], Tuple[int, ...]]


def _grlex_key(zex: Tuple[int, ...], pex: Tuple[int, ...]):
    # graded lexicographic: degree first, then exponent vector; parameter
    # part breaks ties so the ordering is total
    return (-sum(zex), tuple(-e for e in zex), tuple(-e for e in pex))


def _kahan_add(total, comp, value):
    y = value - comp
    t = total + y
    comp = (t - total) - y
    return t, comp


class Polynomial:
    """One polynomial in ``n_unknowns`` unknowns and ``n_params`` parameters.

    Terms are normalized on construction: duplicates merged, zero
    coefficients dropped, the remainder sorted graded-lexicographically.
    """

    __slots__ = ("n_unknowns", "n_params", "terms")

    def __init__(self, n_unknowns: int, n_params: int, terms: Iterable[Term]):
        merged: dict = {}
        for coeff, zex, pex in terms:
            zex = tuple(int(e) for e in zex)
            pex = tuple(int(e) for e in pex)
            if len(zex) != n_unknowns:
                raise DimensionMismatchError(
                    f"term has {len(zex)} unknown exponents, expected {n_unknowns}"
                )
            if len(pex) != n_params:
                raise DimensionMismatchError(
                    f"term has {len(pex)} parameter exponents, expected {n_params}"
                )
            key = (zex, pex)
            merged[key] = merged.get(key, 0j) + complex(coeff)
        kept = [
            (c, zex, pex) for (zex, pex), c in merged.items() if c != 0
        ]
        kept.sort(key=lambda t: _grlex_key(t[1], t[2]))
        self.n_unknowns = n_unknowns
        self.n_params = n_params
        self.terms: Tuple[Term, ...] = tuple(kept)

    def degree(self) -> int:
        """Max total degree in the unknowns over nonzero terms."""
        if not self.terms:
            return 0
        return max(sum(zex) for _, zex, _ in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def diff(self, var: int) -> "Polynomial":
        """Partial derivative with respect to unknown ``var``."""
        out = []
        for coeff, zex, pex in self.terms:
            e = zex[var]
            if e == 0:
                continue
            new = list(zex)
            new[var] = e - 1
            out.append((coeff * e, tuple(new), pex))
        return Polynomial(self.n_unknowns, self.n_params, out)

    def evaluate(self, z: Sequence[complex], p: Sequence[complex] = ()) -> complex:
        """Term-by-term evaluation with compensated (Kahan) summation."""
        if len(z) != self.n_unknowns:
            raise DimensionMismatchError(
                f"point has {len(z)} coordinates, expected {self.n_unknowns}"
            )
        if self.n_params and len(p) != self.n_params:
            raise DimensionMismatchError(
                f"got {len(p)} parameter values, expected {self.n_params}"
            )
        total = 0j
        comp = 0j
        for coeff, zex, pex in self.terms:
            v = coeff
            for j, e in enumerate(zex):
                for _ in range(e):
                    v *= z[j]
            for j, e in enumerate(pex):
                for _ in range(e):
                    v *= p[j]
            total, comp = _kahan_add(total, comp, v)
        return total

    def bind(self, p: Sequence[complex]) -> "Polynomial":
        """Fold parameter values into the coefficients."""
        out = []
        for coeff, zex, pex in self.terms:
            v = coeff
            for j, e in enumerate(pex):
                for _ in range(e):
                    v *= complex(p[j])
            out.append((v, zex, ()))
        return Polynomial(self.n_unknowns, 0, out)

    def scaled(self, factor: complex) -> "Polynomial":
        return Polynomial(
            self.n_unknowns,
            self.n_params,
            [(c * factor, z, p) for c, z, p in self.terms],
        )

    def max_coeff_magnitude(self) -> float:
        if not self.terms:
            return 0.0
        return max(abs(c) for c, _, _ in self.terms)

    def format(self, unknowns: Sequence[str], parameters: Sequence[str] = ()) -> str:
        """Human-readable dump, terms in graded-lex order."""
        if not self.terms:
            return "0"
        parts = []
        for coeff, zex, pex in self.terms:
            factors = []
            for name, e in zip(parameters, pex):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            for name, e in zip(unknowns, zex):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            if coeff.imag == 0:
                cs = f"{coeff.real:.6g}"
            else:
                cs = f"({coeff.real:.6g}{coeff.imag:+.6g}i)"
            parts.append(cs + ("*" + "*".join(factors) if factors else ""))
        return " + ".join(parts)


@dataclass(frozen=True)
class PackedSystem:
    """Flat CSR arrays consumed by the tracking kernels.

    ``jac_*`` hold the symbolic partial derivatives, one CSR row per
    (equation, unknown) pair in row-major order.
    """

    n_unknowns: int
    coeffs: np.ndarray  # complex128[n_terms]
    exps: np.ndarray  # int64[n_terms, n_unknowns]
    offsets: np.ndarray  # int64[n_eqs + 1]
    degrees: np.ndarray  # int64[n_eqs]
    jac_coeffs: np.ndarray
    jac_exps: np.ndarray
    jac_offsets: np.ndarray  # int64[n_eqs * n_unknowns + 1]


class ConcreteSystem:
    """A square-or-not polynomial system with numeric complex coefficients."""

    def __init__(self, polynomials: Sequence[Polynomial], unknowns: Sequence[str]):
        unknowns = tuple(unknowns)
        for poly in polynomials:
            if poly.n_params:
                raise InvalidSystemError("concrete system cannot keep parameters")
            if poly.n_unknowns != len(unknowns):
                raise DimensionMismatchError("polynomial/unknown count mismatch")
        self.polynomials: Tuple[Polynomial, ...] = tuple(polynomials)
        self.unknowns = unknowns
        self._jac_polys = None
        self._packed = None

    @property
    def n_equations(self) -> int:
        return len(self.polynomials)

    @property
    def n_unknowns(self) -> int:
        return len(self.unknowns)

    def degrees(self) -> Tuple[int, ...]:
        return tuple(p.degree() for p in self.polynomials)

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128)
        if z.shape != (self.n_unknowns,):
            raise DimensionMismatchError(
                f"point shape {z.shape}, expected ({self.n_unknowns},)"
            )
        return np.array([p.evaluate(z) for p in self.polynomials], dtype=np.complex128)

    def jacobian(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128)
        if z.shape != (self.n_unknowns,):
            raise DimensionMismatchError(
                f"point shape {z.shape}, expected ({self.n_unknowns},)"
            )
        if self._jac_polys is None:
            self._jac_polys = tuple(
                tuple(p.diff(j) for j in range(self.n_unknowns))
                for p in self.polynomials
            )
        out = np.empty((self.n_equations, self.n_unknowns), dtype=np.complex128)
        for i, row in enumerate(self._jac_polys):
            for j, dp in enumerate(row):
                out[i, j] = dp.evaluate(z)
        return out

    def row_scales(self) -> np.ndarray:
        """Per-equation max coefficient magnitude (0 rows give scale 1)."""
        return np.array(
            [p.max_coeff_magnitude() or 1.0 for p in self.polynomials]
        )

    def normalized(self) -> "ConcreteSystem":
        """Each equation scaled so its largest coefficient has magnitude 1."""
        scales = self.row_scales()
        return ConcreteSystem(
            [p.scaled(1.0 / s) for p, s in zip(self.polynomials, scales)],
            self.unknowns,
        )

    def packed(self) -> PackedSystem:
        if self._packed is None:
            self._packed = _pack(self)
        return self._packed

    def dump(self) -> str:
        lines = []
        for i, p in enumerate(self.polynomials):
            lines.append(f"f{i}: {p.format(self.unknowns)} = 0")
        return "\n".join(lines)


def _pack(system: ConcreteSystem) -> PackedSystem:
    nv = system.n_unknowns
    coeffs, exps, offsets = [], [], [0]
    jc, je, joff = [], [], [0]
    for poly in system.polynomials:
        for c, zex, _ in poly.terms:
            coeffs.append(c)
            exps.append(zex)
        offsets.append(len(coeffs))
    for poly in system.polynomials:
        for var in range(nv):
            dp = poly.diff(var)
            for c, zex, _ in dp.terms:
                jc.append(c)
                je.append(zex)
            joff.append(len(jc))
    degrees = np.array([p.degree() for p in system.polynomials], dtype=np.int64)
    zero = np.zeros((0, nv), dtype=np.int64)
    return PackedSystem(
        n_unknowns=nv,
        coeffs=np.asarray(coeffs, dtype=np.complex128),
        exps=np.asarray(exps, dtype=np.int64) if exps else zero,
        offsets=np.asarray(offsets, dtype=np.int64),
        degrees=degrees,
        jac_coeffs=np.asarray(jc, dtype=np.complex128),
        jac_exps=np.asarray(je, dtype=np.int64) if je else zero,
        jac_offsets=np.asarray(joff, dtype=np.int64),
    )


class ParameterizedSystem:
    """A polynomial system whose coefficients depend on named parameters."""

    def __init__(
        self,
        polynomials: Sequence[Polynomial],
        unknowns: Sequence[str],
        parameters: Sequence[str],
    ):
        self.unknowns = tuple(unknowns)
        self.parameters = tuple(parameters)
        polys = tuple(polynomials)
        referenced = set()
        for poly in polys:
            if poly.n_unknowns != len(self.unknowns):
                raise DimensionMismatchError("polynomial/unknown count mismatch")
            if poly.n_params != len(self.parameters):
                raise DimensionMismatchError("polynomial/parameter count mismatch")
            for _, _, pex in poly.terms:
                for j, e in enumerate(pex):
                    if e:
                        referenced.add(j)
        unused = set(range(len(self.parameters))) - referenced
        if unused:
            names = [self.parameters[j] for j in sorted(unused)]
            raise InvalidSystemError(f"parameters never referenced: {names}")
        self.polynomials = polys

    @property
    def n_equations(self) -> int:
        return len(self.polynomials)

    @property
    def n_unknowns(self) -> int:
        return len(self.unknowns)

    @property
    def n_parameters(self) -> int:
        return len(self.parameters)

    def parameter_vector(self, values: Mapping[str, complex]) -> np.ndarray:
        return np.array(
            [complex(values[name]) for name in self.parameters], dtype=np.complex128
        )

    def bind(self, values) -> ConcreteSystem:
        """Substitute parameter values, producing a ConcreteSystem.

        ``values`` is a mapping from parameter name to value or a sequence
        ordered like ``self.parameters``.
        """
        if isinstance(values, Mapping):
            p = self.parameter_vector(values)
        else:
            p = np.asarray(values, dtype=np.complex128)
            if p.shape != (len(self.parameters),):
                raise DimensionMismatchError(
                    f"got {p.shape[0] if p.ndim else 0} parameter values, "
                    f"expected {len(self.parameters)}"
                )
        return ConcreteSystem([poly.bind(p) for poly in self.polynomials], self.unknowns)

    def dump(self) -> str:
        lines = []
        for i, poly in enumerate(self.polynomials):
            lines.append(f"f{i}: {poly.format(self.unknowns, self.parameters)} = 0")
        return "\n".join(lines)


def total_degree(system) -> int:
    """Product of per-equation degrees (the Bezout path count)."""
    degs = system.degrees() if isinstance(system, ConcreteSystem) else [
        p.degree() for p in system.polynomials
    ]
    out = 1
    for d in degs:
        if d == 0:
            raise InvalidSystemError("system contains a degree-0 equation")
        out *= d
    return out
