"""Run manifests and aggregate suite reports."""

from __future__ import annotations

import datetime as _dt
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .theorems import CheckResult


@dataclass
class RunManifest:
    version: str
    argv: list[str]
    seeds: list[int] = field(default_factory=list)
    tol: float = 1e-9
    spec_sha256: str | None = None
    timestamp: str = ""

    @classmethod
    def create(cls, argv: Sequence[str], tol: float, seeds=(), spec_sha256=None) -> "RunManifest":
        from . import __version__
        now = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        return cls(__version__, list(argv), list(seeds), tol, spec_sha256, now)

    def to_dict(self) -> dict:
        return asdict(self)


def fmt_bits(value: float) -> str:
    """Ten significant digits, trailing zeros kept (``2.000000000``)."""
    return "%#.10g" % value


def summarize(per_system: Sequence[Sequence[CheckResult]]) -> dict:
    """Per-theorem verdict counts plus the worst slack over applicable claims.

    ``max_identity_slack`` is the largest |lhs - rhs| over applicable
    equality claims; ``min_inequality_slack`` the smallest margin over
    applicable inequalities (negative means violated).
    """
    summary: dict[str, dict] = {}
    for results in per_system:
        for r in results:
            s = summary.setdefault(r.theorem, {"counts": {}, "max_identity_slack": None,
                                               "min_inequality_slack": None, "violated_claims": {}})
            s["counts"][r.verdict] = s["counts"].get(r.verdict, 0) + 1
            for c in r.claims:
                if not c.applicable:
                    continue
                if c.relation in ("=", "iff-markov"):
                    cur = s["max_identity_slack"]
                    s["max_identity_slack"] = c.slack if cur is None else max(cur, c.slack)
                else:
                    cur = s["min_inequality_slack"]
                    s["min_inequality_slack"] = c.slack if cur is None else min(cur, c.slack)
                if not c.holds:
                    s["violated_claims"][c.name] = s["violated_claims"].get(c.name, 0) + 1
    return summary
