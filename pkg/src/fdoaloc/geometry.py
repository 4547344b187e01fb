"""Domain types and forward measurement models.

Conventions used everywhere in this package:

* positions are Cartesian 3-vectors in meters, velocities in m/s;
* a measurement pair is ordered (reference, other);
* FDOA values are normalized to range-rate difference in m/s, i.e. the
  measured frequency difference times c/f0 has already been applied at
  ingestion;
* TDOA values are in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .errors import DegeneratePairError, SingularGeometryError

SPEED_OF_LIGHT = 299792458.0  # m/s


def _as_vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components: {arr}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ReceiverState:
    """A receiver's position and velocity at one measurement epoch."""

    position: np.ndarray
    velocity: np.ndarray
    id: str = ""
    epoch: int = 0

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position, "position"))
        object.__setattr__(self, "velocity", _as_vec3(self.velocity, "velocity"))

    def key(self) -> tuple:
        """Hashable identity used to assign range unknowns."""
        return (self.epoch, self.id, tuple(self.position), tuple(self.velocity))

    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))


@dataclass(frozen=True)
class Emitter:
    """A stationary transmitter location."""

    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position, "position"))


Pair = Tuple[ReceiverState, ReceiverState]


def _check_pair(pair: Pair) -> Pair:
    a, b = pair
    if a.epoch != b.epoch:
        raise ValueError(
            f"pair receivers must share an epoch (got {a.epoch} and {b.epoch})"
        )
    return (a, b)


@dataclass(frozen=True)
class FdoaMeasurement:
    """Range-rate difference between the pair's receivers, in m/s.

    Noiseless values always satisfy |value| <= speed(a) + speed(b); noisy
    values may violate the bound and are then flagged infeasible by
    ``filtering.fdoa_bound_check``.
    """

    pair: Pair
    value: float

    def __post_init__(self):
        object.__setattr__(self, "pair", _check_pair(self.pair))
        if not np.isfinite(self.value):
            raise ValueError("FDOA value must be finite")

    @property
    def epoch(self) -> int:
        return self.pair[0].epoch


@dataclass(frozen=True)
class TdoaMeasurement:
    """Arrival-time difference between the pair's receivers, in seconds."""

    pair: Pair
    value: float

    def __post_init__(self):
        object.__setattr__(self, "pair", _check_pair(self.pair))
        if not np.isfinite(self.value):
            raise ValueError("TDOA value must be finite")

    @property
    def epoch(self) -> int:
        return self.pair[0].epoch


Measurement = Union[FdoaMeasurement, TdoaMeasurement]


@dataclass(frozen=True)
class Scenario:
    """An ordered collection of measurements, optionally with ground truth."""

    measurements: Tuple[Measurement, ...]
    truth: Optional[Emitter] = None
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "measurements", tuple(self.measurements))
        if len(self.measurements) == 0:
            raise ValueError("a scenario needs at least one measurement")

    @property
    def fdoa_measurements(self) -> Tuple[FdoaMeasurement, ...]:
        return tuple(m for m in self.measurements if isinstance(m, FdoaMeasurement))

    @property
    def tdoa_measurements(self) -> Tuple[TdoaMeasurement, ...]:
        return tuple(m for m in self.measurements if isinstance(m, TdoaMeasurement))


def _emitter_vec(emitter) -> np.ndarray:
    if isinstance(emitter, Emitter):
        return emitter.position
    return np.asarray(emitter, dtype=np.float64)


def fdoa_forward(emitter, pair: Pair) -> float:
    """Predicted FDOA (range-rate difference, m/s) for a pair.

    Returns ``rdot(other) - rdot(reference)`` where ``rdot(k)`` is the rate
    of change of the emitter-to-receiver-k distance under the receiver's
    motion, ``v_k . (x_k - x) / |x_k - x|``.

    Raises
    ------
    SingularGeometryError
        If the emitter coincides with either receiver position.
    """
    x = _emitter_vec(emitter)
    a, b = pair
    ra_vec = a.position - x
    rb_vec = b.position - x
    ra = np.linalg.norm(ra_vec)
    rb = np.linalg.norm(rb_vec)
    if ra == 0.0 or rb == 0.0:
        raise SingularGeometryError("emitter coincides with a receiver position")
    return float(b.velocity @ rb_vec / rb - a.velocity @ ra_vec / ra)


def tdoa_forward(emitter, pair: Pair) -> float:
    """Predicted TDOA (seconds) for a pair: (|x_b - x| - |x_a - x|) / c.

    The range difference is evaluated as a difference of squares divided by
    the sum of ranges, which stays accurate when the two ranges nearly
    cancel.
    """
    x = _emitter_vec(emitter)
    a, b = pair
    ra_vec = a.position - x
    rb_vec = b.position - x
    ra = np.linalg.norm(ra_vec)
    rb = np.linalg.norm(rb_vec)
    if ra == 0.0 and rb == 0.0:
        raise SingularGeometryError("emitter coincides with both receivers")
    diff = (b.position - a.position) @ (rb_vec + ra_vec)  # |rb|^2 - |ra|^2
    return float(diff / (rb + ra) / SPEED_OF_LIGHT)


def true_ranges(emitter, states) -> np.ndarray:
    """Distances from an emitter to each receiver state, in meters."""
    x = _emitter_vec(emitter)
    return np.array([np.linalg.norm(s.position - x) for s in states])


def make_pair(
    pos_a, vel_a, pos_b, vel_b, epoch: int = 0, id_a: str = "", id_b: str = ""
) -> Pair:
    """Convenience constructor for a (reference, other) pair at one epoch."""
    a = ReceiverState(position=pos_a, velocity=vel_a, id=id_a, epoch=epoch)
    b = ReceiverState(position=pos_b, velocity=vel_b, id=id_b, epoch=epoch)
    if np.array_equal(a.position, b.position):
        raise DegeneratePairError("pair receivers share the same position")
    return (a, b)
