"""Flux-detector arrival distributions and the transit-time density.

Input: a single-run output directory holding detector.csv, ptau.csv and
times.csv.  Left panel: normalized barrier entry/exit arrival densities
p_in(t), p_exit(t).  Right panel: the entry-exit correlation p(tau)
with the peak-to-peak delay tau_tsub (dashed) and the clock tunneling
time tau_T (solid) marked.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from .io import load_columns
from .style import apply_style, plt, save

__all__ = ["render", "main"]


def render(run_dir, out_path) -> None:
    apply_style()
    run_dir = Path(run_dir)
    det = load_columns(run_dir / "detector.csv", "detector")
    dist = load_columns(run_dir / "ptau.csv", "ptau")
    times = load_columns(run_dir / "times.csv", "times")
    tau_tsub = float(times["tau_tsub"][0])
    tau_t = float(times["tau_t"][0])

    fig, (ax_sig, ax_tau) = plt.subplots(1, 2, figsize=(8.4, 3.4))

    ax_sig.plot(det["t"], det["p_in"], color="tab:blue", label="p_in")
    ax_sig.plot(det["t"], det["p_exit"], color="tab:red", label="p_exit")
    ax_sig.set_xlabel("time (a.u.)")
    ax_sig.set_ylabel("arrival density (1/a.u.)")
    ax_sig.legend()

    ax_tau.plot(dist["tau"], dist["p_tau"], color="tab:purple",
                label="p(tau)")
    ax_tau.axvline(tau_tsub, color="0.3", ls="--", lw=1.0,
                   label=f"tau_tsub = {tau_tsub:.2f}")
    ax_tau.axvline(tau_t, color="0.1", ls="-", lw=1.0,
                   label=f"tau_T = {tau_t:.2f}")
    ax_tau.set_xlim(0.0, min(float(dist["tau"][-1]), 4.0 * tau_t))
    ax_tau.set_xlabel("transit delay tau (a.u.)")
    ax_tau.set_ylabel("p(tau) (1/a.u.)")
    ax_tau.legend()

    fig.tight_layout()
    save(fig, out_path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="plot detector arrival densities and p(tau) with "
                    "tau_tsub/tau_T markers")
    parser.add_argument("--in", dest="input", required=True,
                        help="run output directory (detector.csv, ptau.csv, "
                             "times.csv)")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    render(args.input, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
