"""Run metrics in versioned CSV form.

Layout: one comment line naming the schema, a header row, then one row per
logging interval. Readers reject files whose schema line does not match and
report malformed rows with file name and row number. Numbers are written with
``repr``-style shortest float formatting, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

SCHEMA_LINE = "# cavernrl-metrics-v1"

FIELDS = [
    "step",
    "iteration",
    "env_sps",
    "episodes",
    "success_rate",
    "mean_return_ext",
    "mean_score",
    "mean_kills",
    "mean_gold",
    "mean_descents",
    "mean_scout",
    "mean_exp_level",
    "mean_ep_steps",
    "intrinsic_mean",
    "intrinsic_max",
    "intrinsic_frac_pos",
    "store_size",
    "pref_size",
    "annotations_received",
    "requests_sent",
    "batches_dropped",
    "parse_drops",
    "queue_depth",
    "queue_evicted",
    "caption_list_size",
    "warmup_phase",
    "burst_updates",
    "continuous_updates",
    "reward_loss",
    "policy_version",
    "policy_loss",
    "value_loss",
    "entropy",
    "approx_kl",
    "clip_fraction",
    "grad_norm",
    "stale_discarded",
    "stale_mean",
]


class MetricsError(ValueError):
    pass


class MetricsWriter:
    """Appends rows to a metrics CSV, creating header on first write."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._fh.write(SCHEMA_LINE + "\n")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(FIELDS)

    def write_row(self, row: dict) -> None:
        unknown = set(row) - set(FIELDS)
        if unknown:
            raise MetricsError(f"unknown metrics fields: {sorted(unknown)}")
        out = []
        for name in FIELDS:
            v = row.get(name, 0)
            if isinstance(v, (np.floating, np.integer)):
                v = v.item()
            out.append(repr(v) if isinstance(v, float) else str(v))
        self._writer.writerow(out)
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_metrics(path: str | Path) -> dict[str, np.ndarray]:
    """Parse a metrics CSV into column arrays (float64).

    Raises MetricsError naming the file and row for schema mismatches,
    ragged rows, or non-numeric cells.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != SCHEMA_LINE:
            raise MetricsError(f"{path}: unrecognized metrics schema: {first!r}")
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MetricsError(f"{path}: missing header row") from None
        columns: list[list[float]] = [[] for _ in header]
        for lineno, row in enumerate(reader, start=3):
            if len(row) != len(header):
                raise MetricsError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            for j, cell in enumerate(row):
                try:
                    columns[j].append(float(cell))
                except ValueError:
                    raise MetricsError(
                        f"{path}:{lineno}: non-numeric value {cell!r} in "
                        f"column {header[j]!r}") from None
    return {name: np.asarray(col, dtype=np.float64)
            for name, col in zip(header, columns)}
