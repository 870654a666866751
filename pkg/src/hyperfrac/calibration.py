"""Frozen calibration constants (spread bounds and inequality constants)."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=1)
def load_calibration() -> dict:
    text = resources.files("hyperfrac").joinpath("data/calibration.json").read_text()
    return json.loads(text)
