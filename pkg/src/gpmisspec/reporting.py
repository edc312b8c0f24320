"""CSV persistence for datasets, replication records, tables and histograms.

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly.
"""

import csv
from pathlib import Path

import numpy as np

from .estimators import Dataset
from .montecarlo import ESTIMATORS, QUANTITIES, RECORD_FIELDS, ReplicationRecord, aggregate
from .sampling import Design

TABLE_COLUMNS = ("n", "specification", "estimator", "count", "mean_ell", "sd_ell", "mean_E", "mean_D")
REPLICATION_COLUMNS = ("n", "specification", "model_delta") + RECORD_FIELDS


class DatasetParseError(ValueError):
    pass


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_dataset(path, data):
    d = data.design.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x_{k + 1}" for k in range(d)] + ["y"])
        for row, yi in zip(data.design.points, data.y):
            w.writerow([fmt(v) for v in row] + [fmt(yi)])
    return Path(path)


def read_dataset(path):
    """Parse a ``x_1..x_d,y`` CSV; errors name the offending line."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    if d < 1 or header[-1] != "y" or header[:-1] != [f"x_{k + 1}" for k in range(d)]:
        raise DatasetParseError(f"{path}:1: expected header x_1,...,x_d,y, got {','.join(header)}")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d + 1:
            raise DatasetParseError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
        try:
            values.append([float(v) for v in row])
        except ValueError as exc:
            raise DatasetParseError(f"{path}:{lineno}: {exc}") from exc
    if not values:
        raise DatasetParseError(f"{path}: no data rows")
    arr = np.array(values)
    return Dataset(Design(arr[:, :d]), arr[:, d])


def write_replications(path, groups):
    """``groups``: iterable of ``(n, specification, model_delta, records)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPLICATION_COLUMNS)
        for n, spec, delta, records in groups:
            for r in sorted(records, key=lambda r: r.rep_index):
                w.writerow([fmt(n), spec, fmt(float(delta))] + [fmt(getattr(r, f)) for f in RECORD_FIELDS])
    return Path(path)


def _parse_record(row):
    kw = {}
    for f in RECORD_FIELDS:
        v = row[f]
        if f in ("rep_index", "evals_ml", "evals_cv"):
            kw[f] = int(v)
        elif f in ("converged_ml", "converged_cv"):
            kw[f] = v == "1"
        else:
            kw[f] = float(v)
    return ReplicationRecord(**kw)


def read_replications(path):
    """Group rows back into ``{(n, specification): (model_delta, [records])}``."""
    groups = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                key = (int(row["n"]), row["specification"])
                delta = float(row["model_delta"])
                rec = _parse_record(row)
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad replication row ({exc})") from exc
            groups.setdefault(key, (delta, []))[1].append(rec)
    return groups


def table_rows(n, spec, aggregates):
    for est in ESTIMATORS:
        a = aggregates[est]
        yield [n, spec, est, a["count"], a["mean_ell"], a["sd_ell"], a["mean_E"], a["mean_D"]]


def write_table(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return Path(path)


def read_table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_histograms(out_dir, hist_groups):
    """One ``hist_<quantity>_<estimator>.csv`` per pair, all scenarios stacked.

    ``hist_groups``: iterable of ``(n, specification, histograms)``.
    """
    hist_groups = list(hist_groups)
    paths = []
    for q in QUANTITIES:
        for est in ESTIMATORS:
            path = Path(out_dir) / f"hist_{q}_{est}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["n", "specification", "bin_left", "bin_right", "count"])
                for n, spec, hists in hist_groups:
                    edges, counts = hists[(q, est)]
                    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                        w.writerow([fmt(n), spec, fmt(lo), fmt(hi), fmt(c)])
            paths.append(path)
    return paths


def reaggregate(out_dir, bins=30):
    """Rebuild table1.csv and the histogram files from replications.csv."""
    out_dir = Path(out_dir)
    groups = read_replications(out_dir / "replications.csv")
    rows, hist_groups = [], []
    for (n, spec), (_, records) in groups.items():
        aggs, hists = aggregate(records, bins)
        rows.extend(table_rows(n, spec, aggs))
        hist_groups.append((n, spec, hists))
    paths = [write_table(out_dir / "table1.csv", rows)]
    paths += write_histograms(out_dir, hist_groups)
    return paths
