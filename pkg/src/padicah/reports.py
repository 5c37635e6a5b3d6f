"""Canonical JSON encoding shared by all reports and the CLI.

Exact rationals are emitted as [numerator_string, denominator_string]
pairs so consumers never lose precision to 64-bit limits; floats stay
floats; complex values become {"re": ..., "im": ...} objects.  Dumps are
canonical (sorted keys, fixed separators, trailing newline) so identical
inputs produce byte-identical files across runs and thread counts.
"""
from __future__ import annotations

import json
from fractions import Fraction

SCHEMA_VERSION = 1


def rational_pair(v) -> list[str]:
    f = Fraction(v)
    return [str(f.numerator), str(f.denominator)]


def encode_value(v):
    """Encode one numeric value for a report."""
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, (int, Fraction)):
        return rational_pair(v)
    if isinstance(v, complex):
        return {"im": v.imag, "re": v.real}
    if isinstance(v, float):
        return v
    raise TypeError(f"cannot encode value of type {type(v).__name__}")


def encode_values(seq) -> list:
    return [encode_value(v) for v in seq]


def cell_json(cell) -> dict:
    return {"indices": list(cell.indices), "ranks": list(cell.ranks)}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"
