"""Static SVG figures rendered purely from the CSV outputs.

Output is byte-stable for a given ``RENDERER_VERSION`` and matplotlib
version: no timestamps, fixed hash salt, fixed figure geometry.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RENDERER_VERSION = "tsavg-svg-1"

_RC = {
    "svg.hashsalt": RENDERER_VERSION,
    "svg.fonttype": "none",
    "font.size": 9,
    "figure.figsize": (6.0, 4.0),
}


def _save(fig, path):
    fig.savefig(Path(path), format="svg", metadata={"Date": None, "Creator": RENDERER_VERSION})
    plt.close(fig)


def _read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def render_trajectory_svg(csv_path, svg_path):
    """Original and averaged solutions against t, from a trajectory CSV."""
    header, rows = _read(csv_path)
    n = (len(header) - 2) // 2
    t = [float(r[0]) for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for j in range(n):
            ax.plot(t, [float(r[1 + j]) for r in rows], "o-", ms=3, lw=1,
                    label="x" if n == 1 else f"x{j}")
            ax.plot(t, [float(r[1 + n + j]) for r in rows], "s--", ms=3, lw=1,
                    label="xi" if n == 1 else f"xi{j}")
        ax.set_xlabel("t")
        ax.set_title(Path(csv_path).stem)
        ax.legend()
        _save(fig, svg_path)


def render_sweep_svg(summary_path, svg_path):
    """Log-log plot of max |x - xi| against epsilon, one line per q."""
    header, rows = _read(summary_path)
    col = {name: k for k, name in enumerate(header)}
    series = {}
    for r in rows:
        if r[col["row"]] != "run" or float(r[col["epsilon"]]) <= 0:
            continue
        series.setdefault(r[col["q"]], []).append(
            (float(r[col["epsilon"]]), float(r[col["max_diff"]]))
        )
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for q, pts in sorted(series.items()):
            pts.sort()
            ax.loglog([p[0] for p in pts], [p[1] for p in pts], "o-", lw=1, ms=3,
                      label=f"q={q}" if q else None)
        ax.set_xlabel("epsilon")
        ax.set_ylabel("max |x - xi|")
        if any(series):
            ax.legend()
        _save(fig, svg_path)
