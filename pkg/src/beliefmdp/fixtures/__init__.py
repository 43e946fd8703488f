"""Bundled finite test models."""

from __future__ import annotations

import json
from importlib import resources

from ..models import FiniteTablePOMDP

__all__ = ["load_fixture", "FIXTURE_FILES"]

FIXTURE_FILES = {"two_state_pomdp": "two_state_pomdp.json"}


def load_fixture(name: str) -> FiniteTablePOMDP:
    try:
        fname = FIXTURE_FILES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; have {sorted(FIXTURE_FILES)}") from None
    blob = json.loads(resources.files(__package__).joinpath(fname).read_text())
    return FiniteTablePOMDP.from_json(blob)
