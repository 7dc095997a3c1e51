"""Access to the lab defaults held in the ``NILMIX`` Django setting."""

import copy
from typing import Any, Dict

from django.conf import settings

DEFAULTS: Dict[str, Any] = {
    "PRECISION_BITS": 128,
    "PRECISION_CAP_BITS": 4096,
    "SPLIT_RETRIES": 20,
    "SPLIT_COEFFICIENT_BOUND": 10,
    "SPLIT_SEED": 0,
    "KERNEL_SEARCH_RADIUS": 2,
    "ENUMERATION_BUDGET": 10**8,
    "SAMPLE_BUDGET": 10**8,
    "MC_CHUNK_SIZE": 2**16,
    "JOBS": 1,
    "SEED": 0,
    # "e" denotes Euler's number exactly
    "WALDSCHMIDT": {"c": 1, "c1": 1, "c2": "e", "c3": "e"},
    "BOXMAP": {"L1": 1, "L2": 1, "C1": 1, "C2": 1, "delta0": 0.5},
    # consecutive steps outside the support window before a dual orbit walk stops
    "ORBIT_HORIZON": 8,
    "ORBIT_STEP_LIMIT": 10**4,
    "RECORD_RUNS": True,
}


def get_setting(name: str) -> Any:
    """Return a lab setting, falling back to the built-in default.

    Works without a configured Django project so the math modules stay usable
    as a plain library.
    """
    if name not in DEFAULTS:
        raise KeyError(f"Unknown nilmix setting: {name}")
    overrides: Dict[str, Any] = {}
    if settings.configured:
        overrides = getattr(settings, "NILMIX", {}) or {}
    default = DEFAULTS[name]
    value = overrides.get(name, default)
    if isinstance(default, dict):
        merged = copy.deepcopy(default)
        merged.update(value or {})
        return merged
    return value


def resolved_settings() -> Dict[str, Any]:
    """All lab settings with defaults materialized."""
    return {name: get_setting(name) for name in sorted(DEFAULTS)}
