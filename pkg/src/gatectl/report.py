"""Sweep tables and figures built from persisted run records.

Tables are plain CSV with floats printed via ``%.12g``; figures are SVG
files written next to the CSV.  Both are byte-deterministic for a given
set of records: the SVG is stripped of its creation date and rendered
with a fixed hash salt so element ids do not vary between runs.
"""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "gatectl"
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

ALGORITHM_STYLE = {
    "rl": ("tab:blue", "s"),
    "grape": ("tab:purple", "*"),
    "de": ("tab:red", "o"),
    "ga": ("tab:green", "^"),
    "brute": ("black", "D"),
}
TARGET_LOG_INFIDELITY = -3.0


def _fmt(value) -> str:
    if value is None:
        return "NA"
    return f"{value:.12g}"


def _csv_field(text: str) -> str:
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def best_by_cell(records: list[dict]) -> dict:
    """Minimum best_L per (algorithm, T) across repetitions.

    Cells whose repetitions all failed map to None so they surface as
    NA rather than silently vanishing from the table.
    """
    cells: dict[tuple[str, float], dict] = {}
    for record in records:
        key = (record["algorithm"], float(record["T"]))
        cell = cells.setdefault(key, {"best_L": None, "best_F": None})
        if record["status"] != "ok" or record["best_L"] is None:
            continue
        if cell["best_L"] is None or record["best_L"] < cell["best_L"]:
            cell["best_L"] = record["best_L"]
            cell["best_F"] = record["best_F"]
    return cells


def sweep_table(records: list[dict]) -> str:
    """CSV of the per-cell minima, sorted by algorithm then T."""
    cells = best_by_cell(records)
    lines = ["algorithm,T,best_L,best_F"]
    for (algorithm, total_time) in sorted(cells):
        cell = cells[(algorithm, total_time)]
        lines.append(
            f"{algorithm},{_fmt(total_time)},{_fmt(cell['best_L'])},{_fmt(cell['best_F'])}"
        )
    return "\n".join(lines) + "\n"


def _save_svg(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_sweep_report(records: list[dict], outdir, basename: str = "sweep"):
    """Write ``<basename>.csv`` and a matching L-vs-T scatter ``<basename>.svg``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{basename}.csv"
    csv_path.write_text(sweep_table(records))

    cells = best_by_cell(records)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    plotted = False
    for algorithm in sorted({a for a, _ in cells}):
        pts = sorted((t, cells[(algorithm, t)]["best_L"]) for a, t in cells
                     if a == algorithm and cells[(algorithm, t)]["best_L"] is not None)
        if not pts:
            continue
        color, marker = ALGORITHM_STYLE.get(algorithm, ("gray", "x"))
        ax.scatter([p[0] for p in pts], [p[1] for p in pts], c=color,
                   marker=marker, s=48, label=algorithm)
        plotted = True
    ax.axhline(TARGET_LOG_INFIDELITY, color="red", lw=0.8, ls="--")
    ax.set_xlabel("total evolution time T")
    ax.set_ylabel("log10 gate infidelity")
    if plotted:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    svg_path = outdir / f"{basename}.svg"
    _save_svg(fig, svg_path)
    return csv_path, svg_path


# -- learning curves -------------------------------------------------------

_SERIES_KEYS = ("terminal_fidelity", "best_F", "F")


def _episode_fidelities(series: list[dict]) -> np.ndarray:
    """Fidelity trace of one series; training streams record the episode's
    terminal fidelity, optimizer streams their running best."""
    values = []
    for rec in series:
        for key in _SERIES_KEYS:
            if key in rec:
                values.append(rec[key])
                break
        else:
            raise ValueError(f"series record has none of {_SERIES_KEYS}: {rec}")
    return np.array(values, dtype=np.float64)


def learning_curve_table(series_list: list[list[dict]], labels=None):
    """CSV of per-episode fidelities plus their across-run mean.

    Runs of unequal length are truncated to the shortest; the note is
    embedded as a leading comment line and returned alongside the text.
    """
    if not series_list:
        raise ValueError("need at least one series")
    if labels is None:
        labels = [f"run{i}" for i in range(len(series_list))]
    if len(labels) != len(series_list):
        raise ValueError(f"{len(labels)} labels for {len(series_list)} series")
    lengths = [len(s) for s in series_list]
    if min(lengths) == 0:
        raise ValueError("series with zero episodes")
    n = min(lengths)
    truncated = max(lengths) != n
    runs = np.stack([_episode_fidelities(s)[:n] for s in series_list])
    mean = runs.mean(axis=0)

    lines = []
    if truncated:
        lines.append(f"# note: runs truncated to the shortest length ({n} episodes)")
    lines.append("episode," + ",".join(_csv_field(f"F_{lb}") for lb in labels)
                 + ",F_mean")
    for ep in range(n):
        vals = ",".join(_fmt(v) for v in runs[:, ep])
        lines.append(f"{ep},{vals},{_fmt(mean[ep])}")
    meta = {"episodes": n, "truncated": truncated, "labels": list(labels)}
    return "\n".join(lines) + "\n", meta


def write_learning_curves(series_list: list[list[dict]], outdir,
                          basename: str = "curves", labels=None):
    """Write the per-episode CSV and a scatter-plus-mean SVG figure."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    text, meta = learning_curve_table(series_list, labels=labels)
    csv_path = outdir / f"{basename}.csv"
    csv_path.write_text(text)

    n = meta["episodes"]
    runs = np.stack([_episode_fidelities(s)[:n] for s in series_list])
    episodes = np.arange(n)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for row in runs:
        ax.scatter(episodes, row, s=4, c="tab:red", alpha=0.25, linewidths=0)
    ax.plot(episodes, runs.mean(axis=0), c="tab:blue", lw=1.2,
            label=f"mean of {len(series_list)} run(s)")
    ax.set_xlabel("episode")
    ax.set_ylabel("fidelity")
    ax.set_ylim(0.0, 1.02)
    ax.legend(loc="lower right", fontsize=8)
    if meta["truncated"]:
        ax.set_title(f"truncated to {n} episodes", fontsize=9)
    fig.tight_layout()
    svg_path = outdir / f"{basename}.svg"
    _save_svg(fig, svg_path)
    return csv_path, svg_path


def load_series(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines()
            if line.strip()]
