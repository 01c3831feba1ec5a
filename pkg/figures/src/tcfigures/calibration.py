"""Clock response curves f(t) for several level counts.

Input: one or more calibration CSVs (t,f_t), typically tabulated for
different N via `tunnelclock calibration-curve`.  The gray diagonal
marks f = t, the linear passage of time an ideal clock would show; the
finite-N curves oscillate around it and are invertible only on their
first monotone branch.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from .io import load_columns
from .style import apply_style, plt, save

__all__ = ["render", "main"]


def _label(path) -> str:
    # calibration_n3.csv -> "n3"; anything else keeps its stem
    stem = Path(path).stem
    return stem.removeprefix("calibration_") or stem


def render(in_paths, out_path) -> None:
    apply_style()
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    t_max = 0.0
    for path in in_paths:
        cols = load_columns(path, "calibration")
        ax.plot(cols["t"], cols["f_t"], label=_label(path))
        t_max = max(t_max, float(cols["t"][-1]))
    ax.plot([0.0, t_max], [0.0, t_max], color="0.6", lw=1.0, zorder=0,
            label="f = t")
    ax.set_xlabel("coupled time t (a.u.)")
    ax.set_ylabel("clock reading f(t) (a.u.)")
    ax.set_xlim(0.0, t_max)
    ax.legend()
    fig.tight_layout()
    save(fig, out_path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="plot clock response curves with the f = t reference")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="calibration CSV files (t,f_t)")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    render(args.inputs, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
