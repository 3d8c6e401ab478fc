"""Structured pass/fail records for every verified inequality.

Every experiment in this package produces an :class:`ExperimentReport`: a
named list of :class:`Check` entries, each carrying the claim it verified,
the worst residual observed, and the tolerance it was held to.  Reports
serialize to canonical JSON (sorted keys, fixed float formatting, no
timestamps) so that identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

__all__ = ["Check", "ExperimentReport", "canonical_json"]


@dataclass(frozen=True)
class Check:
    """Outcome of one verified inequality or assertion.

    ``passed`` is True/False for a decided check and None when the check
    could not be decided (solver did not converge, empty sample, and so on).
    ``claim`` states the inequality in words, self-contained, so the report
    is legible without the source code next to it.
    """

    check_id: str
    claim: str
    passed: bool | None
    residual: float | None = None
    tolerance: float | None = None
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def inconclusive(self) -> bool:
        return self.passed is None


@dataclass
class ExperimentReport:
    name: str
    checks: list[Check] = field(default_factory=list)
    params: dict[str, Any] = field(default_factory=dict)

    def add(
        self,
        check_id: str,
        claim: str,
        passed: bool | None,
        residual: float | None = None,
        tolerance: float | None = None,
        **details: Any,
    ) -> Check:
        check = Check(check_id, claim, passed, residual, tolerance, dict(details))
        self.checks.append(check)
        return check

    @property
    def passed(self) -> bool:
        """True iff every check is decided and positive."""
        return all(c.passed is True for c in self.checks)

    @property
    def inconclusive(self) -> bool:
        """True iff nothing failed outright but at least one check is undecided."""
        if any(c.passed is False for c in self.checks):
            return False
        return any(c.passed is None for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.passed is False]

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "params": self.params,
            "passed": self.passed,
            "inconclusive": self.inconclusive,
            "checks": [
                {
                    "check_id": c.check_id,
                    "claim": c.claim,
                    "passed": c.passed,
                    "residual": c.residual,
                    "tolerance": c.tolerance,
                    "details": c.details,
                }
                for c in self.checks
            ],
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def _canonicalize(obj: Any) -> Any:
    """Coerce numpy scalars/arrays and tuples into plain JSON-stable types."""
    if isinstance(obj, dict):
        return {str(k): _canonicalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonicalize(v) for v in obj]
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (int, str)):
        return obj
    if hasattr(obj, "tolist"):
        return _canonicalize(obj.tolist())
    if isinstance(obj, float):
        return obj
    try:
        return float(obj)
    except (TypeError, ValueError):
        return str(obj)


def canonical_json(obj: Any) -> str:
    """Serialize to JSON deterministically.

    Keys are sorted and floats go through Python's shortest round-trip
    ``repr``, which is fully determined by the IEEE-754 value, so two runs
    that compute the same numbers emit the same bytes.
    """
    return json.dumps(_canonicalize(obj), sort_keys=True, indent=2, allow_nan=True)
