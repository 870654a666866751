"""Report records shared by the estimate and inequality validators."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

REGIMES = ("near", "far", "mixed")


@dataclass
class EstimateReport:
    """Ratio of a kernel to its two-sided envelope over a grid."""

    name: str
    grid: dict
    ratio_min: float
    ratio_max: float
    regime: str
    spread_bound: float
    n_points: int
    passed: bool = field(init=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        if self.ratio_min > self.ratio_max:
            raise ValueError("ratio_min exceeds ratio_max")
        self.passed = bool(self.ratio_min > 0 and math.isfinite(self.ratio_max)
                           and self.spread <= self.spread_bound)

    @property
    def spread(self) -> float:
        if self.ratio_min <= 0:
            return math.inf
        return self.ratio_max / self.ratio_min

    def to_dict(self) -> dict:
        out = asdict(self)
        out["spread"] = self.spread
        out["pass"] = out.pop("passed")
        return out


@dataclass
class InequalityReport:
    """lhs against a reference right-hand side, in identity or inequality mode."""

    name: str
    lhs: float
    reference_rhs: float
    constant_used: float
    tolerance: float
    mode: str = "identity"
    metadata: dict = field(default_factory=dict)
    ratio: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.mode not in ("identity", "inequality", "upper"):
            raise ValueError("mode is 'identity', 'inequality' or 'upper'")
        rhs = self.constant_used * self.reference_rhs
        self.ratio = self.lhs / rhs if rhs != 0 else math.nan
        if self.mode == "identity":
            ok = abs(self.ratio - 1.0) <= self.tolerance
        elif self.mode == "inequality":
            ok = self.ratio >= 1.0 - self.tolerance
        else:
            ok = self.ratio <= 1.0 + self.tolerance
        self.passed = bool(ok)

    @property
    def error_term(self) -> float:
        """lhs minus the weighted right-hand side."""
        return self.lhs - self.constant_used * self.reference_rhs

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        out["error_term"] = self.error_term
        return out


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def reports_to_json(reports) -> str:
    return json.dumps([_clean(r.to_dict()) for r in reports], indent=2, sort_keys=True)


SUMMARY_COLUMNS = ("name", "pass", "ratio", "lhs", "reference_rhs",
                   "constant_used", "tolerance", "mode")
ESTIMATE_COLUMNS = ("name", "pass", "regime", "ratio_min", "ratio_max",
                    "spread", "spread_bound", "n_points")


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    if not reports:
        return ""
    columns = ESTIMATE_COLUMNS if isinstance(reports[0], EstimateReport) else SUMMARY_COLUMNS
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rep in reports:
        row = rep.to_dict()
        writer.writerow([_format(row.get(c)) for c in columns])
    return buf.getvalue()


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return value
