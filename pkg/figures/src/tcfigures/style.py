"""Shared deterministic rendering setup."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["plt", "apply_style", "save"]


def apply_style() -> None:
    plt.rcdefaults()
    plt.rcParams.update({
        "figure.dpi": 120,
        "savefig.dpi": 120,
        "font.size": 10,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "lines.linewidth": 1.4,
        "legend.framealpha": 0.9,
        "svg.hashsalt": "tcfigures",
    })


def save(fig, out_path) -> None:
    """Write the figure without volatile metadata (re-runs byte-match)."""
    meta = {}
    suffix = str(out_path).lower()
    if suffix.endswith(".png"):
        meta = {"Software": None}
    elif suffix.endswith(".svg"):
        meta = {"Date": None}
    fig.savefig(out_path, metadata=meta)
    plt.close(fig)
