"""Conditioned times against field strength, with power-law fits.

Input: a sweep times CSV.  Left panel: tau_t, tau_d, tau_r versus E0.
Right panel: tau_t and tau_r on log-log axes with least-squares
power-law fits; the fitted exponents go into the legend.
"""

from __future__ import annotations

import argparse

import numpy as np

from .io import load_columns
from .style import apply_style, plt, save

__all__ = ["fit_exponent", "render", "main"]


def fit_exponent(e0, tau):
    """Least-squares slope and intercept of log tau against log e0."""
    slope, intercept = np.polyfit(np.log(e0), np.log(tau), 1)
    return float(slope), float(intercept)


def render(in_path, out_path) -> None:
    apply_style()
    cols = load_columns(in_path, "times")
    e0 = cols["e0"]
    fig, (ax_lin, ax_log) = plt.subplots(1, 2, figsize=(8.4, 3.4))

    for key, label, color in (("tau_t", "tau_T", "tab:blue"),
                              ("tau_d", "tau_D", "tab:gray"),
                              ("tau_r", "tau_R", "tab:red")):
        ax_lin.plot(e0, cols[key], "o-", color=color, label=label)
    ax_lin.set_xlabel("peak field strength E0 (a.u.)")
    ax_lin.set_ylabel("time (a.u.)")
    ax_lin.legend()

    for key, label, color in (("tau_t", "tau_T", "tab:blue"),
                              ("tau_r", "tau_R", "tab:red")):
        slope, intercept = fit_exponent(e0, cols[key])
        ax_log.plot(e0, cols[key], "o", color=color)
        ax_log.plot(e0, np.exp(intercept) * e0 ** slope, color=color,
                    lw=1.0, label=f"{label} ~ E0^{slope:.2f}")
    ax_log.set_xscale("log")
    ax_log.set_yscale("log")
    ax_log.set_xlabel("peak field strength E0 (a.u.)")
    ax_log.set_ylabel("time (a.u.)")
    ax_log.legend()

    fig.tight_layout()
    save(fig, out_path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="plot conditioned times and their power-law fits")
    parser.add_argument("--in", dest="input", required=True,
                        help="sweep times CSV")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    render(args.input, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
