"""Verdict records shared by every checker."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

PASS = "pass"
FAIL = "fail"
INDETERMINATE = "indeterminate"
VERDICTS = (PASS, FAIL, INDETERMINATE)


def _plain(value: Any) -> Any:
    # numpy scalars -> builtins so json.dumps is stable
    if hasattr(value, "item") and not isinstance(value, (list, tuple, dict)):
        try:
            return value.item()
        except (TypeError, ValueError):
            pass
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one finite-horizon check.

    ``witness`` holds diagnostic scalars. A ``fail`` verdict always carries
    the index of a violation under the ``index`` key.
    """

    condition_name: str
    horizon: int
    verdict: str
    witness: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == FAIL and "index" not in self.witness:
            raise ValueError("a failing report must name the violating index")

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict[str, Any]:
        return {
            "condition_name": self.condition_name,
            "horizon": int(self.horizon),
            "verdict": self.verdict,
            "witness": _plain(dict(sorted(self.witness.items()))),
        }


class InternalConsistencyError(RuntimeError):
    """An exact identity failed; the simulation code is wrong, not the input."""


class HorizonOverrun(RuntimeError):
    """A scripted payoff table ran out before the requested horizon."""
