"""Study results and their CSV/JSON serialization.

The CSV schema is stable: one header row, columns
study,M,N,R,T,seed,mean_sq_gap,stderr,slope,slope_err,runtime_s,extra
with `extra` a JSON object of per-row diagnostics.  The JSON mirror holds
the same rows plus config and metadata at full (lossless round-trip)
precision.  Serialization is deterministic: identical results give
identical bytes, so golden-file audits work; wall-clock fields can be
zeroed for such comparisons.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

CSV_COLUMNS = ["study", "M", "N", "R", "T", "seed", "mean_sq_gap", "stderr",
               "slope", "slope_err", "runtime_s", "extra"]


@dataclass
class StudyRow:
    study: str
    M: int
    N: int
    R: int
    T: float
    seed: int
    mean_sq_gap: float | None
    stderr: float | None
    slope: float | None
    slope_err: float | None
    runtime_s: float = 0.0
    extra: dict = field(default_factory=dict)


@dataclass
class StudyResult:
    study: str
    config: dict
    rows: list
    slope: float | None
    slope_err: float | None
    seed: int
    runtime_s: float = 0.0
    metadata: dict = field(default_factory=dict)
    passed: bool = True

    def zeroed_runtime(self) -> "StudyResult":
        rows = [StudyRow(**{**asdict(r), "runtime_s": 0.0}) for r in self.rows]
        return StudyResult(study=self.study, config=self.config, rows=rows,
                           slope=self.slope, slope_err=self.slope_err, seed=self.seed,
                           runtime_s=0.0, metadata=self.metadata, passed=self.passed)

    def to_json(self) -> str:
        payload = {
            "study": self.study,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "slope": self.slope,
            "slope_err": self.slope_err,
            "seed": self.seed,
            "runtime_s": self.runtime_s,
            "metadata": self.metadata,
            "passed": self.passed,
        }
        return json.dumps(payload, sort_keys=True, indent=1)

    @staticmethod
    def from_json(text: str) -> "StudyResult":
        d = json.loads(text)
        rows = [StudyRow(**r) for r in d["rows"]]
        return StudyResult(study=d["study"], config=d["config"], rows=rows,
                           slope=d["slope"], slope_err=d["slope_err"], seed=d["seed"],
                           runtime_s=d["runtime_s"], metadata=d["metadata"],
                           passed=d["passed"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([
                r.study, r.M, r.N, r.R, _fmt(r.T), r.seed,
                _fmt(r.mean_sq_gap), _fmt(r.stderr), _fmt(r.slope), _fmt(r.slope_err),
                _fmt(r.runtime_s), json.dumps(r.extra, sort_keys=True),
            ])
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return ""
    return repr(float(x))


def emit_results(result: StudyResult, fmt: str, out_dir, zero_runtime: bool = False):
    """Write <study>.csv or <study>.json under out_dir; returns the paths."""
    import pathlib

    out = pathlib.Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOError(f"cannot create output directory {out}: {exc}") from exc
    res = result.zeroed_runtime() if zero_runtime else result
    paths = []
    try:
        if fmt in ("csv", "both"):
            p = out / f"{res.study}.csv"
            p.write_text(res.to_csv())
            paths.append(p)
        if fmt in ("json", "both"):
            p = out / f"{res.study}.json"
            p.write_text(res.to_json())
            paths.append(p)
    except OSError as exc:
        raise IOError(f"cannot write results under {out}: {exc}") from exc
    if not paths:
        raise ValueError(f"unknown format {fmt!r} (expected csv, json, or both)")
    return paths
