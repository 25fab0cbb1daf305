"""Network ingest: IEEE Common Data Format and the native JSON format.

The CDF reader follows the published fixed-column card layout (title card
with the MVA base, bus section and branch section each terminated by -999)
with a whitespace-tolerant fallback for files whose columns have drifted.
The native format is a deterministic JSON document that round-trips through
``emit_native``/``parse_native`` losslessly.
"""

from __future__ import annotations

import json
import warnings
from typing import Iterable, TextIO

import jsonschema

from .errors import MalformedCard, MissingSection, NoSlack, NoSlackBus, SchemaViolation
from .model import PQ, PV, SLACK, Branch, Bus, Network, build_network

_CDF_TYPE_TO_KIND = {0: PQ, 1: PQ, 2: PV, 3: SLACK}
_KIND_TO_CDF_TYPE = {PQ: 0, PV: 2, SLACK: 3}

MIN_REACTANCE = 1e-6


def _field(line: str, start: int, end: int) -> str:
    """1-indexed inclusive column slice, tolerant of short lines."""
    return line[start - 1 : end].strip()


def _num(line: str, start: int, end: int, lineno: int, what: str, default=None) -> float:
    text = _field(line, start, end)
    if not text:
        if default is not None:
            return default
        raise MalformedCard(f"empty {what} field", line=lineno, column=f"cols {start}-{end}")
    try:
        return float(text)
    except ValueError:
        raise MalformedCard(
            f"cannot parse {what} value {text!r}", line=lineno, column=f"cols {start}-{end}"
        ) from None


def _tokens_numeric(line: str) -> list[float]:
    out = []
    for tok in line.split():
        try:
            out.append(float(tok))
        except ValueError:
            continue
    return out


def _parse_bus_card(line: str, lineno: int) -> Bus:
    try:
        bus_id = int(_field(line, 1, 4))
    except ValueError:
        raise MalformedCard("cannot parse bus number", line=lineno, column="cols 1-4") from None
    try:
        cdf_type = int(_num(line, 25, 26, lineno, "bus type"))
        load_p = _num(line, 41, 49, lineno, "load MW", default=0.0)
        load_q = _num(line, 50, 59, lineno, "load MVAR", default=0.0)
        gen_p = _num(line, 60, 67, lineno, "generation MW", default=0.0)
        gen_q = _num(line, 68, 75, lineno, "generation MVAR", default=0.0)
        desired = _num(line, 85, 90, lineno, "desired volts", default=0.0)
        shunt_g = _num(line, 107, 114, lineno, "shunt G", default=0.0)
        shunt_b = _num(line, 115, 122, lineno, "shunt B", default=0.0)
        final_v = _num(line, 28, 33, lineno, "final voltage", default=0.0)
    except MalformedCard:
        # drifted columns: map the numeric tokens positionally
        nums = _tokens_numeric(line)
        if len(nums) < 10:
            raise
        _, area, zone, cdf_type, final_v, _ang, load_p, load_q, gen_p, gen_q = nums[:10]
        desired = nums[11] if len(nums) > 11 else 0.0
        shunt_g = nums[14] if len(nums) > 14 else 0.0
        shunt_b = nums[15] if len(nums) > 15 else 0.0
        cdf_type = int(cdf_type)
    if cdf_type not in _CDF_TYPE_TO_KIND:
        raise MalformedCard(f"unknown bus type {cdf_type}", line=lineno, column="cols 25-26")
    kind = _CDF_TYPE_TO_KIND[cdf_type]
    setpoint = desired if desired > 0 else (final_v if final_v > 0 else 1.0)
    # quality deviation is measured from the bus's normal operating voltage:
    # the final-voltage column of the published files (setpoint at regulated
    # buses, the solved base-case magnitude elsewhere), 1.0 when absent
    nominal = final_v if final_v > 0 else (setpoint if kind in (SLACK, PV) else 1.0)
    return Bus(
        id=bus_id,
        kind=kind,
        load_p=load_p,
        load_q=load_q,
        gen_p=gen_p,
        gen_q=gen_q,
        v_nominal=nominal,
        v_setpoint=setpoint,
        shunt_g=shunt_g,
        shunt_b=shunt_b,
    )


def _parse_branch_card(line: str, lineno: int, branch_id: int) -> Branch:
    try:
        from_bus = int(_field(line, 1, 4))
        to_bus = int(_field(line, 6, 9))
        resistance = _num(line, 20, 29, lineno, "resistance")
        reactance = _num(line, 30, 40, lineno, "reactance")
        charging = _num(line, 41, 50, lineno, "line charging", default=0.0)
        btype = int(_num(line, 19, 19, lineno, "branch type", default=0.0))
        ratio = _num(line, 77, 82, lineno, "turns ratio", default=0.0)
        shift = _num(line, 84, 90, lineno, "phase shift", default=0.0)
    except (ValueError, MalformedCard):
        # drifted-column fallback: only for fully numeric whitespace cards,
        # otherwise a corrupt field would silently shift every column
        nums = _tokens_numeric(line)
        if len(nums) < 9 or len(nums) != len(line.split()):
            raise MalformedCard("unparseable branch card", line=lineno) from None
        from_bus, to_bus = int(nums[0]), int(nums[1])
        btype = int(nums[5])
        resistance, reactance, charging = nums[6], nums[7], nums[8]
        ratio = nums[14] if len(nums) > 14 else 0.0
        shift = nums[15] if len(nums) > 15 else 0.0
    if btype == 4 or shift != 0.0:
        raise MalformedCard(
            "phase-shifting transformers are not supported", line=lineno, column="cols 19, 84-90"
        )
    if reactance == 0.0 and resistance == 0.0:
        warnings.warn(
            f"branch {from_bus}-{to_bus}: zero impedance clamped to x={MIN_REACTANCE} pu",
            stacklevel=3,
        )
        reactance = MIN_REACTANCE
    return Branch(
        id=branch_id,
        from_bus=from_bus,
        to_bus=to_bus,
        resistance=resistance,
        reactance=reactance,
        charging_b=charging,
        tap=ratio if ratio > 0 else 1.0,
    )


def parse_cdf(source: str | TextIO) -> Network:
    """Parse an IEEE Common Data Format document into a Network.

    Raises MalformedCard with line/column context, MissingSection when the
    bus or branch section is absent, and NoSlackBus when no type-3 bus exists.
    """
    text = source if isinstance(source, str) else source.read()
    lines = text.splitlines()
    if not lines:
        raise MissingSection("empty document")

    base_mva = 100.0
    title = lines[0]
    field = _field(title, 32, 37)
    if field:
        try:
            base_mva = float(field)
        except ValueError:
            raise MalformedCard("cannot parse MVA base", line=1, column="cols 32-37") from None

    buses: list[Bus] = []
    branches: list[Branch] = []
    section = None
    seen = set()
    branch_id = 0
    for lineno, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        upper = stripped.upper()
        if not stripped:
            continue
        if upper.startswith("BUS DATA"):
            section = "bus"
            seen.add("bus")
            continue
        if upper.startswith("BRANCH DATA"):
            section = "branch"
            seen.add("branch")
            continue
        if stripped.startswith("-999") or stripped.startswith("-99") or stripped.startswith("-9"):
            section = None
            continue
        if upper.startswith("END OF DATA"):
            break
        if upper.startswith(("LOSS ZONES", "INTERCHANGE DATA", "TIE LINES")):
            section = "ignored"
            continue
        if section == "bus":
            buses.append(_parse_bus_card(line, lineno))
        elif section == "branch":
            branch_id += 1
            branches.append(_parse_branch_card(line, lineno, branch_id))

    if "bus" not in seen:
        raise MissingSection("no BUS DATA section")
    if "branch" not in seen:
        raise MissingSection("no BRANCH DATA section")
    if not any(b.kind == SLACK for b in buses):
        raise NoSlackBus("CDF document defines no type-3 (slack) bus")
    return build_network(buses, branches, base_mva)


# --- native JSON format ----------------------------------------------------

NATIVE_FORMAT = "grid-network"
NATIVE_VERSION = 1

_BUS_SCHEMA = {
    "type": "object",
    "required": ["id", "kind"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "integer"},
        "kind": {"enum": [SLACK, PV, PQ]},
        "load_p": {"type": "number"},
        "load_q": {"type": "number"},
        "gen_p": {"type": "number"},
        "gen_q": {"type": "number"},
        "v_nominal": {"type": "number", "exclusiveMinimum": 0},
        "v_setpoint": {"type": "number", "exclusiveMinimum": 0},
        "shunt_g": {"type": "number"},
        "shunt_b": {"type": "number"},
    },
}

_BRANCH_SCHEMA = {
    "type": "object",
    "required": ["id", "from_bus", "to_bus", "resistance", "reactance"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "integer"},
        "from_bus": {"type": "integer"},
        "to_bus": {"type": "integer"},
        "resistance": {"type": "number", "minimum": 0},
        "reactance": {"type": "number"},
        "charging_b": {"type": "number"},
        "tap": {"type": "number", "exclusiveMinimum": 0},
        "switchable": {"type": "boolean"},
    },
}

NATIVE_SCHEMA = {
    "type": "object",
    "required": ["format", "version", "base_mva", "buses", "branches"],
    "properties": {
        "format": {"const": NATIVE_FORMAT},
        "version": {"type": "integer"},
        "base_mva": {"type": "number", "exclusiveMinimum": 0},
        "buses": {"type": "array", "minItems": 1, "items": _BUS_SCHEMA},
        "branches": {"type": "array", "items": _BRANCH_SCHEMA},
    },
}


def _json_path(error: jsonschema.ValidationError) -> str:
    path = "$"
    for part in error.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def parse_native(source: str | TextIO) -> Network:
    """Parse the native JSON network document (schema-checked)."""
    text = source if isinstance(source, str) else source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, NATIVE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaViolation(exc.message, path=_json_path(exc)) from exc
    buses = [Bus(**entry) for entry in doc["buses"]]
    branches = [Branch(**entry) for entry in doc["branches"]]
    try:
        return build_network(buses, branches, doc["base_mva"])
    except NoSlack as exc:
        raise NoSlackBus(str(exc)) from exc


def emit_native(net: Network) -> str:
    """Serialize a Network deterministically (sorted ids, stable key order)."""
    doc = {
        "format": NATIVE_FORMAT,
        "version": NATIVE_VERSION,
        "base_mva": net.base_mva,
        "buses": [
            {
                "id": b.id,
                "kind": b.kind,
                "load_p": b.load_p,
                "load_q": b.load_q,
                "gen_p": b.gen_p,
                "gen_q": b.gen_q,
                "v_nominal": b.v_nominal,
                "v_setpoint": b.v_setpoint,
                "shunt_g": b.shunt_g,
                "shunt_b": b.shunt_b,
            }
            for b in net.buses
        ],
        "branches": [
            {
                "id": br.id,
                "from_bus": br.from_bus,
                "to_bus": br.to_bus,
                "resistance": br.resistance,
                "reactance": br.reactance,
                "charging_b": br.charging_b,
                "tap": br.tap,
                "switchable": br.switchable,
            }
            for br in net.branches
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def load_network(path: str) -> Network:
    """Load a network file, dispatching on content (JSON vs CDF)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return parse_native(text)
    return parse_cdf(text)


def _place(row: list, start: int, end: int, text: str, align: str = "right") -> None:
    width = end - start + 1
    chunk = text[:width]
    chunk = chunk.rjust(width) if align == "right" else chunk.ljust(width)
    row[start - 1 : end] = list(chunk)


def emit_cdf(net: Network, title: str = "GRIDHEAL EXPORT", solution=None) -> str:
    """Write a Network in IEEE CDF layout (used to build bundled fixtures).

    When a power-flow solution is supplied its voltages fill the final
    voltage/angle columns, as in the published files; otherwise the bus
    nominals are written there.
    """
    import math as _math

    out = []
    head = [" "] * 133
    _place(head, 2, 9, "08/10/26", "left")
    _place(head, 11, 30, title[:20], "left")
    _place(head, 32, 37, f"{net.base_mva:6.1f}")
    _place(head, 39, 42, "2026")
    _place(head, 44, 44, "W")
    _place(head, 46, 73, title, "left")
    out.append("".join(head).rstrip())
    out.append(f"BUS DATA FOLLOWS                            {len(net.buses)} ITEMS")
    for b in net.buses:
        if solution is not None:
            final_v = solution.v_mag[b.id]
            final_ang = _math.degrees(solution.v_ang[b.id])
        else:
            final_v, final_ang = b.v_nominal, 0.0
        row = [" "] * 133
        _place(row, 1, 4, str(b.id))
        _place(row, 6, 17, f"BUS {b.id}", "left")
        _place(row, 19, 20, "1")
        _place(row, 21, 23, "1")
        _place(row, 25, 26, str(_KIND_TO_CDF_TYPE[b.kind]))
        _place(row, 28, 33, f"{final_v:.4f}"[:6])
        _place(row, 34, 40, f"{final_ang:.2f}")
        _place(row, 41, 49, f"{b.load_p:.2f}")
        _place(row, 50, 59, f"{b.load_q:.2f}")
        _place(row, 60, 67, f"{b.gen_p:.2f}")
        _place(row, 68, 75, f"{b.gen_q:.2f}")
        _place(row, 77, 83, "0.0")
        _place(row, 85, 90, f"{b.v_setpoint:.4f}"[:6] if b.kind in (SLACK, PV) else "0.0")
        _place(row, 91, 98, "0.0")
        _place(row, 99, 106, "0.0")
        _place(row, 107, 114, f"{b.shunt_g:.4f}")
        _place(row, 115, 122, f"{b.shunt_b:.4f}")
        _place(row, 124, 127, "0")
        out.append("".join(row).rstrip())
    out.append("-999")
    out.append(f"BRANCH DATA FOLLOWS                         {len(net.branches)} ITEMS")
    for br in net.branches:
        row = [" "] * 133
        _place(row, 1, 4, str(br.from_bus))
        _place(row, 6, 9, str(br.to_bus))
        _place(row, 11, 12, "1")
        _place(row, 13, 15, "1")
        _place(row, 17, 17, "1")
        _place(row, 19, 19, "0" if br.tap == 1.0 else "1")
        _place(row, 20, 29, f"{br.resistance:.5f}")
        _place(row, 30, 40, f"{br.reactance:.5f}")
        _place(row, 41, 50, f"{br.charging_b:.5f}")
        _place(row, 51, 55, "0")
        _place(row, 57, 61, "0")
        _place(row, 63, 67, "0")
        _place(row, 69, 72, "0")
        _place(row, 74, 74, "0")
        _place(row, 77, 82, f"{br.tap:.4f}" if br.tap != 1.0 else "0.0")
        _place(row, 84, 90, "0.0")
        out.append("".join(row).rstrip())
    out.append("-999")
    out.append("END OF DATA")
    return "\n".join(out) + "\n"
