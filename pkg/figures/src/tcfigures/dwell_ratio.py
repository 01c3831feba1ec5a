"""Dwell-time cross-check over a field sweep.

Input: a sweep times CSV.  Plots the ratio of the density-integral
dwell time tau_d_prime to the clock dwell time tau_d against field
strength; the dashed line at 1 marks exact agreement of the two
independent extraction routes.
"""

from __future__ import annotations

import argparse

from .io import load_columns
from .style import apply_style, plt, save

__all__ = ["render", "main"]


def render(in_path, out_path) -> None:
    apply_style()
    cols = load_columns(in_path, "times")
    ratio = cols["tau_d_prime"] / cols["tau_d"]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(cols["e0"], ratio, "o-", color="tab:blue")
    ax.axhline(1.0, color="0.3", ls="--", lw=1.0, label="ratio one")
    pad = max(0.12, 1.6 * float(abs(ratio - 1.0).max()))
    ax.set_ylim(1.0 - pad, 1.0 + pad)
    ax.set_xlabel("peak field strength E0 (a.u.)")
    ax.set_ylabel("tau_D' / tau_D")
    ax.legend()
    fig.tight_layout()
    save(fig, out_path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="plot the density/clock dwell-time ratio over a sweep")
    parser.add_argument("--in", dest="input", required=True,
                        help="sweep times CSV")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    render(args.input, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
