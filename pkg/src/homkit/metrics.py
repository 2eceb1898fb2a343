"""Average corner error, its aggregates, and CSV export.

An estimate's quality is the mean Euclidean distance between the four patch
corners mapped by the target homography and by the estimated one.  Samples
where estimation failed carry ``ace=None`` ("undefined"); they rank above
every finite value when computing medians and always count as outliers.
"""

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyInput, ProjectiveDivergence, SchemaError
from .geometry import apply_homography

OUTLIER_THRESHOLD = 50.0

RECORD_FIELDS = ["sample_id", "method", "corruption_kind", "magnitude", "ace"]
SUMMARY_FIELDS = ["method", "corruption_kind", "magnitude",
                  "median_ace", "outlier_ratio", "n"]
CURVE_FIELDS = ["method", "corruption_kind", "magnitude", "percentile", "ace"]


@dataclass(frozen=True)
class AceRecord:
    sample_id: str
    method: str
    corruption_kind: str
    magnitude: float
    ace: Optional[float]          # None means estimation failed / undefined

    def __post_init__(self):
        if self.ace is not None and self.ace < 0:
            raise ValueError("ace must be >= 0 when defined")


def ace(h_target, h_output, corners):
    """Mean corner distance between the two mappings of the four corners."""
    corners = np.asarray(corners, dtype=float)
    a = apply_homography(h_target, corners)
    b = apply_homography(h_output, corners)
    return float(np.linalg.norm(a - b, axis=1).mean())


def safe_ace(h_target, h_output, corners):
    """ace(), but a diverging corner yields None instead of raising."""
    try:
        return ace(h_target, h_output, corners)
    except ProjectiveDivergence:
        return None


def _values(records):
    vals = []
    for r in records:
        vals.append(r.ace if isinstance(r, AceRecord) else r)
    return vals


def median_ace(records):
    """Median with undefined entries ranked as +inf; NAN when the median
    position lands on an undefined entry."""
    vals = _values(records)
    if not vals:
        raise EmptyInput("median_ace of no records")
    ranked = sorted(math.inf if v is None else float(v) for v in vals)
    n = len(ranked)
    if n % 2:
        med = ranked[n // 2]
    else:
        med = 0.5 * (ranked[n // 2 - 1] + ranked[n // 2])
    return math.nan if math.isinf(med) else med


def outlier_ratio(records, threshold=OUTLIER_THRESHOLD):
    """Fraction of records that are undefined or exceed the ACE threshold."""
    vals = _values(records)
    if not vals:
        raise EmptyInput("outlier_ratio of no records")
    bad = sum(1 for v in vals if v is None or v > threshold)
    return bad / len(vals)


def sorted_curve(records):
    """Sorted (percentile, ace) pairs, undefined entries last as None."""
    vals = _values(records)
    if not vals:
        raise EmptyInput("sorted_curve of no records")
    finite = sorted(v for v in vals if v is not None)
    ordered = finite + [None] * (len(vals) - len(finite))
    n = len(ordered)
    if n == 1:
        return [(0.0, ordered[0])]
    return [(i / (n - 1), v) for i, v in enumerate(ordered)]


# --- CSV export / import ---

def _fmt_ace(v):
    return "undefined" if v is None else repr(float(v))


def write_records_csv(records, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([r.sample_id, r.method, r.corruption_kind,
                        repr(float(r.magnitude)), _fmt_ace(r.ace)])


def read_records_csv(path):
    records = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != RECORD_FIELDS:
            raise SchemaError(f"bad records header: {header}")
        for row in reader:
            if len(row) != 5:
                raise SchemaError(f"bad records row: {row}")
            ace_v = None if row[4] == "undefined" else float(row[4])
            records.append(AceRecord(row[0], row[1], row[2], float(row[3]), ace_v))
    return records


def summarize(records):
    """Group records by (method, corruption, magnitude) into summary rows.

    Rows are sorted by method, then corruption kind, then magnitude, so a
    fixed record multiset always yields identical bytes on disk.
    """
    groups = {}
    for r in records:
        groups.setdefault((r.method, r.corruption_kind, r.magnitude), []).append(r)
    rows = []
    for (method, kind, mag) in sorted(groups):
        recs = groups[(method, kind, mag)]
        rows.append({
            "method": method,
            "corruption_kind": kind,
            "magnitude": mag,
            "median_ace": median_ace(recs),
            "outlier_ratio": outlier_ratio(recs),
            "n": len(recs),
        })
    return rows


def write_summary_csv(rows, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SUMMARY_FIELDS)
        for r in rows:
            med = "NAN" if math.isnan(r["median_ace"]) else repr(r["median_ace"])
            w.writerow([r["method"], r["corruption_kind"], repr(float(r["magnitude"])),
                        med, repr(r["outlier_ratio"]), r["n"]])


def read_summary_csv(path):
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != SUMMARY_FIELDS:
            raise SchemaError(f"bad summary header: {header}")
        for row in reader:
            if len(row) != 6:
                raise SchemaError(f"bad summary row: {row}")
            rows.append({
                "method": row[0],
                "corruption_kind": row[1],
                "magnitude": float(row[2]),
                "median_ace": math.nan if row[3] == "NAN" else float(row[3]),
                "outlier_ratio": float(row[4]),
                "n": int(row[5]),
            })
    return rows


def write_curves_csv(records, path):
    """Per-group sorted ACE curves, one row per (group, percentile)."""
    groups = {}
    for r in records:
        groups.setdefault((r.method, r.corruption_kind, r.magnitude), []).append(r)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CURVE_FIELDS)
        for (method, kind, mag) in sorted(groups):
            for pct, v in sorted_curve(groups[(method, kind, mag)]):
                w.writerow([method, kind, repr(float(mag)), repr(pct), _fmt_ace(v)])
