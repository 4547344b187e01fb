"""Construction of TDOA/FDOA polynomial systems with range-variable lifting.

Every emitter-receiver distance that the measurement equations need is
lifted to its own range unknown r_k constrained by r_k^2 = |x - x_k|^2,
which clears all square roots and leaves polynomial equations. Receiver
data and measurement values stay symbolic parameters so one structural
family serves many bindings (the parameter homotopy relies on this).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DegeneratePairError, DimensionMismatchError, InvalidSystemError
from .geometry import (
    SPEED_OF_LIGHT,
    Emitter,
    FdoaMeasurement,
    ReceiverState,
    TdoaMeasurement,
)
from .polynomials import ParameterizedSystem, Polynomial


class BuilderWarning(UserWarning):
    """Non-fatal degeneracies noticed while building a system."""


# minimum measurement count that reduces the solution set to points,
# keyed by (mode, dimension, altitude constraint); 2D + altitude cells
# are undefined
TABLE1_MINIMUM = {
    ("tdoa", 2, False): 2,
    ("tdoa", 3, False): 3,
    ("tdoa", 3, True): 2,
    ("fdoa", 2, False): 2,
    ("fdoa", 3, False): 3,
    ("fdoa", 3, True): 2,
    ("tdoa+fdoa", 2, False): 1,
    ("tdoa+fdoa", 3, False): 2,
    ("tdoa+fdoa", 3, True): 1,
}

# distinct finite solutions of the 3-epoch FDOA family at generic complex
# parameters; measured empirically (stable across random gamma and p0),
# see tests/test_acceptance.py
FDOA_THREE_EPOCH_GENERIC_ROOT_COUNT = 368


def table1_minimum(mode: str, dimension: int, altitude: bool = False) -> int:
    key = (mode, dimension, altitude)
    if key not in TABLE1_MINIMUM:
        raise InvalidSystemError(
            f"no measurement-count bound for mode={mode!r}, dimension={dimension}, "
            f"altitude={altitude}"
        )
    return TABLE1_MINIMUM[key]


@dataclass(frozen=True)
class GeoSystemSpec:
    """What kind of geolocation system to build."""

    mode: str = "fdoa"  # "fdoa" | "tdoa" | "tdoa+fdoa"
    dimension: int = 3
    altitude_constraint: bool = False
    altitude_kind: str = "flat"  # "flat": z = alt, "sphere": |x|^2 = alt^2

    def __post_init__(self):
        if self.mode not in ("fdoa", "tdoa", "tdoa+fdoa"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if self.altitude_kind not in ("flat", "sphere"):
            raise ValueError(f"unknown altitude kind {self.altitude_kind!r}")
        if self.altitude_constraint and self.dimension == 2:
            raise InvalidSystemError("altitude constraint is undefined in 2D")


@dataclass(frozen=True)
class UnknownLayout:
    """Ordering of unknowns: emitter coordinates first, then ranges."""

    dimension: int
    range_names: Tuple[str, ...]
    state_keys: Tuple[tuple, ...]
    states: Tuple[ReceiverState, ...]

    @property
    def coordinates(self) -> Tuple[str, ...]:
        return ("x", "y", "z")[: self.dimension]

    @property
    def unknowns(self) -> Tuple[str, ...]:
        return self.coordinates + self.range_names

    @property
    def n_unknowns(self) -> int:
        return self.dimension + len(self.range_names)

    def range_index(self, key: tuple) -> int:
        """Position of a state's range in the unknown vector."""
        return self.dimension + self.state_keys.index(key)

    def split(self, vector):
        v = np.asarray(vector)
        return v[: self.dimension], v[self.dimension:]


class GeoSystem(ParameterizedSystem):
    """A geolocation family that knows its layout and parameter packing."""

    def __init__(
        self,
        polynomials,
        unknowns,
        parameters,
        layout: UnknownLayout,
        spec: GeoSystemSpec,
        signature: tuple,
        altitude_value: Optional[float] = None,
    ):
        super().__init__(polynomials, unknowns, parameters)
        self.layout = layout
        self.spec = spec
        self.signature = signature
        self.altitude_value = altitude_value

    def parameter_values(
        self,
        fdoa_measurements: Sequence[FdoaMeasurement] = (),
        tdoa_measurements: Sequence[TdoaMeasurement] = (),
        altitude: Optional[float] = None,
    ) -> np.ndarray:
        """Numeric parameter vector for measurements matching this family.

        The measurements must share the family's structure (same counts
        and the same receiver-state sharing pattern).
        """
        plan = _collect(fdoa_measurements, tdoa_measurements, self.spec)
        if plan.signature != self.signature:
            raise InvalidSystemError(
                "measurements do not match the family's structural signature"
            )
        d = self.spec.dimension
        values = []
        for info in plan.states:
            values.extend(info.state.position[:d])
            if info.needs_velocity:
                values.extend(info.state.velocity[:d])
        values.extend(m.value for m in fdoa_measurements)
        values.extend(m.value for m in tdoa_measurements)
        if self.spec.altitude_constraint:
            alt = altitude if altitude is not None else self.altitude_value
            if alt is None:
                raise InvalidSystemError("altitude value required but not given")
            values.append(alt)
        return np.asarray(values, dtype=np.complex128)

    def bind_measurements(self, fdoa_measurements=(), tdoa_measurements=(),
                          altitude=None):
        """Bind measurement values and scale rows for the tracker."""
        p = self.parameter_values(fdoa_measurements, tdoa_measurements, altitude)
        return self.bind(p).normalized()

    def slot_states(
        self, fdoa_measurements=(), tdoa_measurements=()
    ) -> Tuple[ReceiverState, ...]:
        """Receiver states of a concrete measurement set, in range-slot
        order. Needed when this family was built structurally: the layout
        then holds placeholder states, and feasibility checks must use the
        states actually bound."""
        plan = _collect(fdoa_measurements, tdoa_measurements, self.spec)
        if plan.signature != self.signature:
            raise InvalidSystemError(
                "measurements do not match the family's structural signature"
            )
        return tuple(s.state for s in plan.states if s.needs_range)

    def lifted_point(self, emitter, states=None) -> np.ndarray:
        """(coordinates, true ranges) for an emitter, as a real vector."""
        pos = emitter.position if isinstance(emitter, Emitter) else np.asarray(emitter, float)
        d = self.spec.dimension
        coords = list(pos[:d])
        states = self.layout.states if states is None else states
        ranges = [
            float(np.linalg.norm(s.position[:d] - pos[:d])) for s in states
        ]
        return np.array(coords + ranges, dtype=np.float64)


@dataclass(frozen=True)
class _StateInfo:
    state: ReceiverState
    needs_velocity: bool
    needs_range: bool


@dataclass(frozen=True)
class _BuildPlan:
    states: Tuple[_StateInfo, ...]
    keys: Tuple[tuple, ...]
    fdoa_slots: Tuple[Tuple[int, int], ...]
    tdoa_slots: Tuple[Tuple[int, int], ...]
    signature: tuple


def _collect(fdoa_measurements, tdoa_measurements, spec: GeoSystemSpec) -> _BuildPlan:
    """Assign state slots, range unknowns and parameter needs."""
    order: list = []
    info: dict = {}

    def touch(state: ReceiverState, velocity: bool, rng: bool):
        key = state.key()
        if key not in info:
            order.append(key)
            info[key] = {"state": state, "vel": False, "range": False}
        info[key]["vel"] = info[key]["vel"] or velocity
        info[key]["range"] = info[key]["range"] or rng

    for m in fdoa_measurements:
        a, b = m.pair
        if np.array_equal(a.position, b.position):
            raise DegeneratePairError("FDOA pair receivers share a position")
        touch(a, velocity=True, rng=True)
        touch(b, velocity=True, rng=True)
    for m in tdoa_measurements:
        a, b = m.pair
        if np.array_equal(a.position, b.position):
            raise DegeneratePairError("TDOA pair receivers share a position")
        touch(a, velocity=False, rng=True)  # reference range appears squared
        touch(b, velocity=False, rng=False)

    if spec.dimension == 2:
        for key in order:
            s = info[key]["state"]
            if s.position[2] != 0.0 or s.velocity[2] != 0.0:
                raise DimensionMismatchError(
                    "2D mode requires zero z position and velocity components"
                )

    states = tuple(
        _StateInfo(info[k]["state"], info[k]["vel"], info[k]["range"]) for k in order
    )
    keys = tuple(order)
    fdoa_slots = tuple(
        (keys.index(m.pair[0].key()), keys.index(m.pair[1].key()))
        for m in fdoa_measurements
    )
    tdoa_slots = tuple(
        (keys.index(m.pair[0].key()), keys.index(m.pair[1].key()))
        for m in tdoa_measurements
    )
    signature = (
        spec.mode,
        spec.dimension,
        spec.altitude_constraint,
        tuple((s.needs_velocity, s.needs_range) for s in states),
        fdoa_slots,
        tdoa_slots,
    )
    return _BuildPlan(states, keys, fdoa_slots, tdoa_slots, signature)


def _build_from_plan(
    plan: _BuildPlan,
    spec: GeoSystemSpec,
    fdoa_measurements=(),
    tdoa_measurements=(),
    altitude_value: Optional[float] = None,
) -> GeoSystem:
    d = spec.dimension
    range_keys = [k for k, s in zip(plan.keys, plan.states) if s.needs_range]
    range_states = [s.state for s in plan.states if s.needs_range]
    layout = UnknownLayout(
        dimension=d,
        range_names=tuple(f"r{i + 1}" for i in range(len(range_keys))),
        state_keys=tuple(range_keys),
        states=tuple(range_states),
    )
    nv = layout.n_unknowns

    # parameter table: positions (and velocities where needed) per state,
    # then measurement values, then the optional altitude
    param_names: list = []
    pos_base: dict = {}
    vel_base: dict = {}
    for slot, s in enumerate(plan.states):
        pos_base[slot] = len(param_names)
        param_names.extend(f"p{axis}{slot + 1}" for axis in "xyz"[:d])
        if s.needs_velocity:
            vel_base[slot] = len(param_names)
            param_names.extend(f"v{axis}{slot + 1}" for axis in "xyz"[:d])
    f_base = len(param_names)
    param_names.extend(f"f{j + 1}" for j in range(len(plan.fdoa_slots)))
    tau_base = len(param_names)
    param_names.extend(f"tau{j + 1}" for j in range(len(plan.tdoa_slots)))
    if spec.altitude_constraint:
        alt_index = len(param_names)
        param_names.append("alt")
    n_p = len(param_names)

    def zexp(**powers):
        e = [0] * nv
        for name, p in powers.items():
            e[layout.unknowns.index(name)] = p
        return tuple(e)

    def pexp(*indices):
        e = [0] * n_p
        for i in indices:
            e[i] += 1
        return tuple(e)

    zero_z = (0,) * nv
    polys = []

    # FDOA: r_a r_b f - r_a * vb.(xb - x) + r_b * va.(xa - x) = 0
    for j, (sa, sb) in enumerate(plan.fdoa_slots):
        ra = layout.unknowns[layout.range_index(plan.keys[sa])]
        rb = layout.unknowns[layout.range_index(plan.keys[sb])]
        fp = f_base + j
        terms = [(1.0, zexp(**{ra: 1, rb: 1}), pexp(fp))]
        for c in range(d):
            coord = layout.coordinates[c]
            terms.append((-1.0, zexp(**{ra: 1}), pexp(vel_base[sb] + c, pos_base[sb] + c)))
            terms.append((1.0, zexp(**{ra: 1, coord: 1}), pexp(vel_base[sb] + c)))
            terms.append((1.0, zexp(**{rb: 1}), pexp(vel_base[sa] + c, pos_base[sa] + c)))
            terms.append((-1.0, zexp(**{rb: 1, coord: 1}), pexp(vel_base[sa] + c)))
        polys.append(Polynomial(nv, n_p, terms))

    # TDOA (isolate-and-square once): c^2 tau^2 + 2 c tau r_a
    #   + |xa|^2 - |xb|^2 + 2 (xb - xa).x = 0
    C = SPEED_OF_LIGHT
    for j, (sa, sb) in enumerate(plan.tdoa_slots):
        ra = layout.unknowns[layout.range_index(plan.keys[sa])]
        tp = tau_base + j
        terms = [
            (C * C, zero_z, pexp(tp, tp)),
            (2.0 * C, zexp(**{ra: 1}), pexp(tp)),
        ]
        for c in range(d):
            coord = layout.coordinates[c]
            terms.append((1.0, zero_z, pexp(pos_base[sa] + c, pos_base[sa] + c)))
            terms.append((-1.0, zero_z, pexp(pos_base[sb] + c, pos_base[sb] + c)))
            terms.append((2.0, zexp(**{coord: 1}), pexp(pos_base[sb] + c)))
            terms.append((-2.0, zexp(**{coord: 1}), pexp(pos_base[sa] + c)))
        polys.append(Polynomial(nv, n_p, terms))

    # range consistency: r_k^2 - |x|^2 + 2 xk.x - |xk|^2 = 0
    for key in range_keys:
        slot = plan.keys.index(key)
        rname = layout.unknowns[layout.range_index(key)]
        terms = [(1.0, zexp(**{rname: 2}), pexp())]
        for c in range(d):
            coord = layout.coordinates[c]
            terms.append((-1.0, zexp(**{coord: 2}), pexp()))
            terms.append((2.0, zexp(**{coord: 1}), pexp(pos_base[slot] + c)))
            terms.append((-1.0, zero_z, pexp(pos_base[slot] + c, pos_base[slot] + c)))
        polys.append(Polynomial(nv, n_p, terms))

    if spec.altitude_constraint:
        if spec.altitude_kind == "flat":
            terms = [(1.0, zexp(z=1), pexp()), (-1.0, zero_z, pexp(alt_index))]
        else:
            terms = [(1.0, zexp(**{c: 2}), pexp()) for c in layout.coordinates]
            terms.append((-1.0, zero_z, pexp(alt_index, alt_index)))
        polys.append(Polynomial(nv, n_p, terms))

    _warn_on_degeneracies(fdoa_measurements, spec)
    return GeoSystem(
        polys, layout.unknowns, param_names, layout, spec, plan.signature,
        altitude_value,
    )


def _warn_on_degeneracies(fdoa_measurements, spec: GeoSystemSpec):
    for j, m in enumerate(fdoa_measurements):
        a, b = m.pair
        still = a.speed() == 0.0 and b.speed() == 0.0
        if still and m.value == 0.0:
            warnings.warn(
                f"FDOA measurement {j}: zero velocities and zero value make the "
                "equation identically zero",
                BuilderWarning,
                stacklevel=3,
            )
        elif still:
            warnings.warn(
                f"FDOA measurement {j}: zero velocities with nonzero value "
                "(infeasible, caught downstream)",
                BuilderWarning,
                stacklevel=3,
            )


def _warn_below_minimum(n: int, spec: GeoSystemSpec):
    try:
        minimum = table1_minimum(spec.mode, spec.dimension, spec.altitude_constraint)
    except InvalidSystemError:
        return
    if n < minimum:
        warnings.warn(
            f"{n} measurement(s) in mode {spec.mode!r} ({spec.dimension}D) is below "
            f"the finiteness bound {minimum}; the solution set will not be finite",
            BuilderWarning,
            stacklevel=3,
        )


def build_fdoa(
    measurements: Sequence[FdoaMeasurement], spec: Optional[GeoSystemSpec] = None
) -> GeoSystem:
    """FDOA-only system: one bilinear equation per measurement plus one
    range quadratic per distinct receiver state."""
    spec = spec or GeoSystemSpec(mode="fdoa")
    if spec.mode != "fdoa":
        raise ValueError("spec.mode must be 'fdoa' for build_fdoa")
    if not measurements:
        raise InvalidSystemError("need at least one measurement")
    _warn_below_minimum(len(measurements), spec)
    plan = _collect(measurements, (), spec)
    return _build_from_plan(plan, spec, fdoa_measurements=measurements)


def build_tdoa(
    measurements: Sequence[TdoaMeasurement], spec: Optional[GeoSystemSpec] = None
) -> GeoSystem:
    """TDOA-only system: one linear equation per measurement (after the
    single isolate-and-square) plus the reference range quadratic.

    All pairs must share one reference receiver (the pair's first entry).
    """
    spec = spec or GeoSystemSpec(mode="tdoa")
    if spec.mode != "tdoa":
        raise ValueError("spec.mode must be 'tdoa' for build_tdoa")
    if not measurements:
        raise InvalidSystemError("need at least one measurement")
    ref_keys = {m.pair[0].key() for m in measurements}
    if len(ref_keys) != 1:
        raise InvalidSystemError(
            "TDOA mode requires a common reference receiver across pairs"
        )
    _warn_below_minimum(len(measurements), spec)
    plan = _collect((), measurements, spec)
    return _build_from_plan(plan, spec, tdoa_measurements=measurements)


def build_geo_system(
    fdoa_measurements: Sequence[FdoaMeasurement],
    tdoa_measurements: Sequence[TdoaMeasurement],
    spec: Optional[GeoSystemSpec] = None,
) -> GeoSystem:
    """Mixed TDOA+FDOA system; each TDOA equation uses its own pair's
    reference range, so no global reference receiver is needed."""
    spec = spec or GeoSystemSpec(mode="tdoa+fdoa")
    if not fdoa_measurements and not tdoa_measurements:
        raise InvalidSystemError("need at least one measurement")
    n = max(len(fdoa_measurements), len(tdoa_measurements))
    _warn_below_minimum(n, spec)
    plan = _collect(fdoa_measurements, tdoa_measurements, spec)
    return _build_from_plan(
        plan, spec, fdoa_measurements=fdoa_measurements,
        tdoa_measurements=tdoa_measurements,
    )


def add_altitude_constraint(
    system: GeoSystem, altitude: float, kind: Optional[str] = None
) -> GeoSystem:
    """Append the known-altitude equation and its parameter.

    ``kind`` "flat" appends z = altitude; "sphere" appends
    x^2 + y^2 + z^2 = altitude^2. Only defined in 3D.
    """
    if system.spec.dimension == 2:
        raise InvalidSystemError("altitude constraint is undefined in 2D")
    if system.spec.altitude_constraint:
        raise InvalidSystemError("system already has an altitude constraint")
    kind = kind or system.spec.altitude_kind
    spec = GeoSystemSpec(
        mode=system.spec.mode,
        dimension=system.spec.dimension,
        altitude_constraint=True,
        altitude_kind=kind,
    )
    nv = system.layout.n_unknowns
    n_p = len(system.parameters) + 1
    alt_index = n_p - 1

    # widen the old parameter exponent tuples by one slot
    widened = []
    for poly in system.polynomials:
        widened.append(
            Polynomial(
                nv, n_p, [(c, z, p + (0,)) for c, z, p in poly.terms]
            )
        )
    zero_z = (0,) * nv
    z_unknown = [0] * nv
    if kind == "flat":
        z_unknown[2] = 1
        alt_terms = [
            (1.0, tuple(z_unknown), (0,) * (n_p - 1) + (0,)),
            (-1.0, zero_z, (0,) * (n_p - 1) + (1,)),
        ]
    else:
        alt_terms = []
        for c in range(3):
            e = [0] * nv
            e[c] = 2
            alt_terms.append((1.0, tuple(e), (0,) * n_p))
        pex = [0] * n_p
        pex[alt_index] = 2
        alt_terms.append((-1.0, zero_z, tuple(pex)))
    widened.append(Polynomial(nv, n_p, alt_terms))

    signature = system.signature[:2] + (True,) + system.signature[3:]
    return GeoSystem(
        widened,
        system.unknowns,
        tuple(system.parameters) + ("alt",),
        system.layout,
        spec,
        signature,
        altitude_value=float(altitude),
    )


def build_fdoa_family(n_measurements: int = 3, dimension: int = 3) -> GeoSystem:
    """Structural FDOA family with one fresh receiver pair per epoch.

    Used by the RANSAC loop: any sample of ``n_measurements`` FDOA
    measurements taken at distinct epochs binds into this one family.
    """
    spec = GeoSystemSpec(mode="fdoa", dimension=dimension)
    placeholder = []
    for j in range(n_measurements):
        a = ReceiverState(position=(1.0 + j, 0.0, 0.0), velocity=(1.0, 0.0, 0.0),
                          epoch=j)
        b = ReceiverState(position=(0.0, 1.0 + j, 0.0), velocity=(0.0, 1.0, 0.0),
                          epoch=j)
        placeholder.append(FdoaMeasurement(pair=(a, b), value=0.0))
    plan = _collect(placeholder, (), spec)
    return _build_from_plan(plan, spec, fdoa_measurements=placeholder)
