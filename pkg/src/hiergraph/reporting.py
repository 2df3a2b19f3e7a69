"""Tab-separated tables shaped like the aggregate-statistics and MMD tables."""

from __future__ import annotations

import csv
from pathlib import Path

from hiergraph.metrics import STATISTICS

STATS_COLUMNS = ("nodes", "edges", "diameter", "n_c", "c_med", "clustering", "density", "transitivity",
                 "diameter_exact")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_stats_tsv(path, rows: dict[str, dict]) -> Path:
    """One row per model; values are the per-graph means (or the single graph's values)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(("model",) + STATS_COLUMNS)
        for name, row in rows.items():
            w.writerow([name] + [_fmt(row[c]) for c in STATS_COLUMNS])
    return path


def write_mmd_tsv(path, reports: dict) -> Path:
    path = Path(path)
    first = next(iter(reports.values()))
    with open(path, "w", newline="") as fh:
        fh.write(first.header() + "\n")
        for name, rep in reports.items():
            for note in rep.notes:
                fh.write(f"# {name}: {note}\n")
            approx = [s for s, a in rep.approximate.items() if a]
            if approx:
                fh.write(f"# {name}: sampled estimates for {','.join(approx)}\n")
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(("model", "n_real", "n_generated") + STATISTICS)
        for name, rep in reports.items():
            w.writerow([name, *rep.sizes] + [_fmt(rep.values.get(s, float("nan"))) for s in STATISTICS])
    return path


def read_tsv(path) -> list[dict]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines, delimiter="\t"))
