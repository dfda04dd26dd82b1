"""Byte-stable JSON serialization: sorted keys, floats at 6 significant digits."""

from __future__ import annotations

import json


def round_floats(value, digits: int = 6):
    """Recursively quantize floats to the given significant digits.

    Quantizing before serialization (rather than formatting at dump time)
    keeps parse(serialize(x)) == x: the parsed floats are already fixed points
    of the rounding.
    """
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {k: round_floats(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v, digits) for v in value]
    return value


def canonical_dumps(payload: dict, digits: int = 6) -> str:
    return json.dumps(round_floats(payload, digits), sort_keys=True, indent=2) + "\n"
