"""Optional SVG line charts for convergence curves."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import median_series


def write_svg(rows, path, metric: str | None = None, title: str | None = None) -> bool:
    """Plot the per-n summary of ``metric`` on log-log axes. Returns False when
    the rows contain no such series."""
    if metric is None:
        metrics = sorted({r["metric"] for r in rows if r["seed"] in ("median", "mean")})
        if not metrics:
            return False
        metric = metrics[0]
    pts = median_series(rows, metric)
    if not pts:
        return False
    xs, ys = zip(*pts)
    plt.rcParams["svg.hashsalt"] = "graphonlab"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, ys, marker="o")
    ax.set_xscale("log")
    if all(y > 0 for y in ys):
        ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel(metric)
    ax.set_title(title or f"{rows[0]['kind']}: {metric}")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return True
