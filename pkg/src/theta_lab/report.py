"""Structured results of verification suites."""

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .core_arith import RatFunc, scalar_to_json


def value_to_json(x):
    """Exact JSON form for scalars, a string for anything else."""
    if isinstance(x, (bool, int, str)) or x is None:
        return x
    if isinstance(x, (Fraction, RatFunc)):
        return scalar_to_json(x)
    return str(x)


@dataclass
class CheckReport:
    suite: str
    parameters: dict
    passed: bool
    residuals: list = field(default_factory=list)
    elapsed: float = 0.0

    def to_json(self):
        # elapsed stays out of the document so reruns are byte-identical
        return {
            "suite": self.suite,
            "parameters": {k: value_to_json(v) for k, v in sorted(self.parameters.items())},
            "window": {k: self.parameters[k] for k in ("depth", "order", "modes") if k in self.parameters},
            "pass": self.passed,
            "residuals": [{"location": str(loc), "expected": value_to_json(e), "got": value_to_json(g)}
                          for loc, e, g in self.residuals],
        }

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    def text(self, limit=20):
        status = "PASS" if self.passed else "FAIL"
        params = " ".join(f"{k}={v}" for k, v in sorted(self.parameters.items()))
        lines = [f"{status} {self.suite} [{params}] {len(self.residuals)} residuals, {self.elapsed:.2f}s"]
        for loc, e, g in self.residuals[:limit]:
            lines.append(f"  {loc}: expected {e}, got {g}")
        if len(self.residuals) > limit:
            lines.append(f"  ... {len(self.residuals) - limit} more")
        return "\n".join(lines)


def run_suite(entry, **params):
    """Run a registered suite with its defaults overridden by ``params``."""
    unknown = set(params) - set(entry.defaults)
    if unknown:
        raise TypeError(f"suite {entry.name} does not take {', '.join(sorted(unknown))}")
    args = dict(entry.defaults, **params)
    start = time.perf_counter()
    residuals = list(entry.run(**args))
    return CheckReport(entry.name, args, not residuals, residuals, time.perf_counter() - start)
