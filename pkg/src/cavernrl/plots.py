"""Learning-curve figures and summary tables from metrics CSVs.

Runs are grouped (typically one group per reward mechanism, one CSV per
seed); each group is drawn as the across-seed mean with a shaded standard
error band. Runs whose logging grids differ are inner-joined on the step
column with a warning; a single seed draws a bare curve.
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .metrics import read_metrics  # noqa: E402

log = logging.getLogger("cavernrl")


def aggregate_runs(paths: list[str | Path], field: str
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(steps, mean, stderr) for one field across runs, inner-joined on step.

    stderr is zero for a single run. Raises ValueError if the field is
    missing or no common steps exist.
    """
    if not paths:
        raise ValueError("no metrics files given")
    runs = []
    for p in paths:
        cols = read_metrics(p)
        if field not in cols:
            raise ValueError(f"{p}: no column {field!r}")
        runs.append((cols["step"], cols[field]))
    common = set(runs[0][0].tolist())
    for steps, _ in runs[1:]:
        common &= set(steps.tolist())
    if not common:
        raise ValueError("runs share no common logging steps")
    grid = np.array(sorted(common))
    if any(len(steps) != len(grid) for steps, _ in runs):
        log.warning("runs have mismatched step grids; inner-joining on %d "
                    "common points", len(grid))
    rows = []
    for steps, vals in runs:
        index = {s: i for i, s in enumerate(steps.tolist())}
        rows.append(vals[[index[s] for s in grid.tolist()]])
    mat = np.stack(rows)
    mean = mat.mean(axis=0)
    if len(rows) > 1:
        stderr = mat.std(axis=0, ddof=1) / np.sqrt(len(rows))
    else:
        stderr = np.zeros_like(mean)
    return grid, mean, stderr


def plot_groups(groups: dict[str, list[str | Path]], field: str,
                out_path: str | Path, title: str | None = None) -> Path:
    """One figure: a mean curve (± stderr band when >1 seed) per group."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, paths in groups.items():
        steps, mean, stderr = aggregate_runs(paths, field)
        (line,) = ax.plot(steps, mean, label=f"{label} (n={len(paths)})")
        if stderr.any():
            ax.fill_between(steps, mean - stderr, mean + stderr,
                            color=line.get_color(), alpha=0.25, linewidth=0)
    ax.set_xlabel("environment steps")
    ax.set_ylabel(field.replace("_", " "))
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def summary_table(groups: dict[str, list[str | Path]],
                  fields: list[str]) -> str:
    """Plain-text table of final-row mean ± stderr per group and field."""
    header = ["group", "seeds"] + fields
    lines = [header]
    for label, paths in groups.items():
        row = [label, str(len(paths))]
        for field in fields:
            _, mean, stderr = aggregate_runs(paths, field)
            row.append(f"{mean[-1]:.4g} ± {stderr[-1]:.2g}")
        lines.append(row)
    widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
    out = []
    for i, r in enumerate(lines):
        out.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
        if i == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"
