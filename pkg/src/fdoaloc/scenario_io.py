"""Scenario serialization: a strict JSON document and a line format.

JSON schema (format_version 1)::

    {
      "format_version": 1,
      "truth": [x, y, z],              // optional, meters
      "measurements": [
        {
          "epoch": 0,
          "rx1": {"pos": [m,m,m], "vel": [mps,mps,mps], "id": "..."},
          "rx2": {...},
          "fdoa_mps": 1.25             // and/or "tdoa_s"
        }
      ]
    }

Unknown fields anywhere are rejected. Units are fixed: meters, m/s,
seconds. The writer is deterministic, so write -> read -> write is
byte-identical.

The line format is one record per line: ``truth X Y Z`` or
``fdoa|tdoa EPOCH ax ay az avx avy avz bx by bz bvx bvy bvz VALUE``,
with ``#`` comments. Receiver ids are not representable there.
"""

from __future__ import annotations

import json
from typing import Optional

from ._io import atomic_write_text
from .errors import ScenarioFormatError
from .geometry import (
    Emitter,
    FdoaMeasurement,
    ReceiverState,
    Scenario,
    TdoaMeasurement,
)

FORMAT_VERSION = 1


def _require_keys(obj: dict, allowed, required, where: str):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ScenarioFormatError(
            f"unknown field(s) {sorted(unknown)} in {where}; "
            f"allowed: {sorted(allowed)}"
        )
    missing = set(required) - set(obj)
    if missing:
        raise ScenarioFormatError(f"missing field(s) {sorted(missing)} in {where}")


def _vec3(value, where: str):
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 3
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise ScenarioFormatError(f"{where} must be a list of 3 numbers")
    return [float(v) for v in value]


def _receiver(obj, epoch: int, where: str) -> ReceiverState:
    if not isinstance(obj, dict):
        raise ScenarioFormatError(f"{where} must be an object")
    _require_keys(obj, ("pos", "vel", "id"), ("pos", "vel"), where)
    rid = obj.get("id", "")
    if not isinstance(rid, str):
        raise ScenarioFormatError(f"{where}.id must be a string")
    return ReceiverState(
        position=_vec3(obj["pos"], f"{where}.pos"),
        velocity=_vec3(obj["vel"], f"{where}.vel"),
        id=rid,
        epoch=epoch,
    )


def scenario_from_json_text(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioFormatError("top level must be an object")
    _require_keys(
        doc, ("format_version", "truth", "measurements"),
        ("format_version", "measurements"), "top level",
    )
    if doc["format_version"] != FORMAT_VERSION:
        raise ScenarioFormatError(
            f"unsupported format_version {doc['format_version']!r}, "
            f"expected {FORMAT_VERSION}"
        )
    entries = doc["measurements"]
    if not isinstance(entries, list) or not entries:
        raise ScenarioFormatError("measurements must be a non-empty list")
    measurements = []
    for k, entry in enumerate(entries):
        where = f"measurements[{k}]"
        if not isinstance(entry, dict):
            raise ScenarioFormatError(f"{where} must be an object")
        _require_keys(
            entry, ("epoch", "rx1", "rx2", "fdoa_mps", "tdoa_s"),
            ("epoch", "rx1", "rx2"), where,
        )
        if "fdoa_mps" not in entry and "tdoa_s" not in entry:
            raise ScenarioFormatError(f"{where} needs fdoa_mps and/or tdoa_s")
        epoch = entry["epoch"]
        if not isinstance(epoch, int) or isinstance(epoch, bool):
            raise ScenarioFormatError(f"{where}.epoch must be an integer")
        pair = (
            _receiver(entry["rx1"], epoch, f"{where}.rx1"),
            _receiver(entry["rx2"], epoch, f"{where}.rx2"),
        )
        if "fdoa_mps" in entry:
            value = entry["fdoa_mps"]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ScenarioFormatError(f"{where}.fdoa_mps must be a number")
            measurements.append(FdoaMeasurement(pair=pair, value=float(value)))
        if "tdoa_s" in entry:
            value = entry["tdoa_s"]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ScenarioFormatError(f"{where}.tdoa_s must be a number")
            measurements.append(TdoaMeasurement(pair=pair, value=float(value)))
    truth = None
    if "truth" in doc:
        truth = Emitter(position=_vec3(doc["truth"], "truth"))
    try:
        return Scenario(measurements=tuple(measurements), truth=truth)
    except ValueError as exc:
        raise ScenarioFormatError(str(exc)) from exc


def scenario_to_json_text(scenario: Scenario) -> str:
    doc: dict = {"format_version": FORMAT_VERSION}
    if scenario.truth is not None:
        doc["truth"] = list(scenario.truth.position)
    entries = []
    for m in scenario.measurements:
        a, b = m.pair
        entry = {
            "epoch": a.epoch,
            "rx1": {"pos": list(a.position), "vel": list(a.velocity), "id": a.id},
            "rx2": {"pos": list(b.position), "vel": list(b.velocity), "id": b.id},
        }
        if isinstance(m, FdoaMeasurement):
            entry["fdoa_mps"] = m.value
        else:
            entry["tdoa_s"] = m.value
        entries.append(entry)
    doc["measurements"] = entries
    return json.dumps(doc, indent=2) + "\n"


def scenario_from_lines(text: str) -> Scenario:
    measurements = []
    truth = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        kind = fields[0].lower()
        try:
            if kind == "truth":
                if len(fields) != 4:
                    raise ValueError("truth needs 3 coordinates")
                truth = Emitter(position=[float(v) for v in fields[1:4]])
            elif kind in ("fdoa", "tdoa"):
                if len(fields) != 15:
                    raise ValueError(
                        f"{kind} record needs epoch, 12 receiver numbers and a value"
                    )
                epoch = int(fields[1])
                nums = [float(v) for v in fields[2:15]]
                a = ReceiverState(position=nums[0:3], velocity=nums[3:6], epoch=epoch)
                b = ReceiverState(position=nums[6:9], velocity=nums[9:12], epoch=epoch)
                value = nums[12]
                cls = FdoaMeasurement if kind == "fdoa" else TdoaMeasurement
                measurements.append(cls(pair=(a, b), value=value))
            else:
                raise ValueError(f"unknown record type {fields[0]!r}")
        except ValueError as exc:
            raise ScenarioFormatError(f"line {lineno}: {exc}") from exc
    if not measurements:
        raise ScenarioFormatError("no measurement records found")
    return Scenario(measurements=tuple(measurements), truth=truth)


def scenario_to_lines(scenario: Scenario) -> str:
    out = []
    if scenario.truth is not None:
        out.append("truth " + " ".join(f"{v:.17g}" for v in scenario.truth.position))
    for m in scenario.measurements:
        a, b = m.pair
        kind = "fdoa" if isinstance(m, FdoaMeasurement) else "tdoa"
        nums = list(a.position) + list(a.velocity) + list(b.position) + list(b.velocity)
        out.append(
            f"{kind} {a.epoch} "
            + " ".join(f"{v:.17g}" for v in nums)
            + f" {m.value:.17g}"
        )
    return "\n".join(out) + "\n"


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioFormatError(f"cannot read {path}: {exc}") from exc
    if path.endswith(".json"):
        return scenario_from_json_text(text)
    return scenario_from_lines(text)


def save_scenario(scenario: Scenario, path: str):
    if path.endswith(".json"):
        atomic_write_text(path, scenario_to_json_text(scenario))
    else:
        atomic_write_text(path, scenario_to_lines(scenario))
