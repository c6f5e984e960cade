"""Tri-state verdict reports with deterministic JSON serialization."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

VERDICTS = ("pass", "fail", "inconclusive")
EXIT_CODES = {"pass": 0, "fail": 1, "inconclusive": 2}


@dataclass
class Report:
    """Outcome of a check.

    ``details`` holds measured quantities, ``witness`` the offending (or
    extremal) object, ``assumptions`` the hypotheses a caller vouched for
    instead of the check verifying them.
    """

    name: str
    verdict: str
    details: dict = field(default_factory=dict)
    witness: Any = None
    assumptions: list[str] = field(default_factory=list)
    profile: str | None = None

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def to_dict(self) -> dict:
        out = {"name": self.name, "verdict": self.verdict, "details": jsonable(self.details)}
        if self.witness is not None:
            out["witness"] = jsonable(self.witness)
        if self.assumptions:
            out["assumptions"] = list(self.assumptions)
        if self.profile is not None:
            out["profile"] = self.profile
        return out

    def to_json(self) -> str:
        return dumps(self.to_dict())


def combine(name: str, reports: list[Report], **details: Any) -> Report:
    """Fail beats inconclusive beats pass."""
    verdicts = [r.verdict for r in reports]
    if "fail" in verdicts:
        v = "fail"
    elif "inconclusive" in verdicts:
        v = "inconclusive"
    else:
        v = "pass"
    parts = {r.name: r.to_dict() for r in reports}
    return Report(name, v, {**details, "parts": parts})


def jsonable(obj: Any) -> Any:
    """Convert to plain JSON types; exact numbers become strings when needed."""
    if isinstance(obj, Report):
        return obj.to_dict()
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, Fraction):
        return obj.numerator if obj.denominator == 1 else f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if obj.is_integer():
            return int(obj)
        return float(repr(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = list(obj)
        if isinstance(obj, (set, frozenset)):
            items = sorted(items, key=repr)
        return [jsonable(x) for x in items]
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    try:
        import numpy as np

        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return jsonable(float(obj))
        if isinstance(obj, np.ndarray):
            return jsonable(obj.tolist())
    except ImportError:  # pragma: no cover
        pass
    return str(obj)


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def config_hash(cfg: Any) -> str:
    blob = json.dumps(jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
