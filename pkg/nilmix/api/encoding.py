"""JSON/CSV encodings of lab numbers.

Outputs never carry a bare float: exact values are fraction strings or
``{"exact": ...}``, certified values are ``{"lower", "upper"}`` decimal
enclosures, statistical values are ``{"value", "radius"}`` with the standard
error as radius, and uncertified floating cross-checks are tagged
``{"approximate": ...}``.
"""

import json
from decimal import Decimal
from fractions import Fraction
from pathlib import PurePath
from typing import Any, Dict, Iterable, List, Mapping, Sequence

import numpy as np
from mpmath import iv, mp

from nilmix.algebra.intervals import CertifiedComplex, decimal_bounds, working_precision


def exact(value) -> Dict[str, str]:
    return {"exact": str(Fraction(value)) if not isinstance(value, str) else value}


def enclosure(value: "iv.mpf", digits: int = 20) -> Dict[str, str]:
    lo, hi = decimal_bounds(value, digits)
    return {"lower": lo, "upper": hi}


def complex_enclosure(value: CertifiedComplex) -> Dict[str, Dict[str, str]]:
    with working_precision(max(mp.prec, 64)):
        return {"re": enclosure(value.real_interval()), "im": enclosure(value.imag_interval())}


def estimate(value: float, radius: float) -> Dict[str, str]:
    """A statistical estimate; ``radius`` is its standard error."""
    return {"value": repr(float(value)), "radius": repr(float(radius))}


def approximate(value: float) -> Dict[str, str]:
    return {"approximate": repr(float(value))}


def _is_interval(value) -> bool:
    return isinstance(value, iv.mpf)


def jsonable(value: Any, mark_floats: bool = True) -> Any:
    """Plain JSON data with every number in one of the marked forms.

    ``mark_floats=False`` keeps floats bare, for echoing configs as given.
    """
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (Fraction, Decimal)):
        return str(value)
    if isinstance(value, (float, np.floating)):
        return approximate(value) if mark_floats else float(value)
    if _is_interval(value):
        return enclosure(value)
    if isinstance(value, CertifiedComplex):
        return complex_enclosure(value)
    if isinstance(value, mp.mpf):
        return approximate(float(value))
    if isinstance(value, PurePath):
        return str(value)
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist(), mark_floats)
    if hasattr(value, "to_json"):
        return jsonable(value.to_json(), mark_floats)
    if isinstance(value, Mapping):
        return {str(k): jsonable(v, mark_floats) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [jsonable(v, mark_floats) for v in items]
    raise TypeError(f"Cannot encode {type(value).__name__} in a lab result")


def csv_cell(value: Any) -> str:
    """One CSV cell: decimal strings for numbers, compact JSON for nested data."""
    value = jsonable(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, str)):
        return str(value)
    if isinstance(value, dict) and len(value) == 1:
        (inner,) = value.values()
        if isinstance(inner, str):
            return inner
    return json.dumps(value, separators=(",", ":"), ensure_ascii=False)


def csv_rows(rows: Iterable[Mapping[str, Any]], columns: Sequence[str]) -> List[List[str]]:
    return [[csv_cell(row.get(column)) for column in columns] for row in rows]
