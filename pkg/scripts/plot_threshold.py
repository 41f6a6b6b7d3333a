"""Plot the SCAD thresholding map next to soft thresholding."""

import argparse

import numpy as np

from regionscad.penalty import ScadParams, scad_prox, soft_threshold


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=2.0)
    ap.add_argument("--rho", type=float, default=1.0)
    ap.add_argument("--out", default="threshold.png")
    args = ap.parse_args()

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    z = np.linspace(-10, 10, 2001)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(z, z, ":", color="grey", lw=1)
    ax.plot(z, soft_threshold(z, args.lam / args.rho), label="soft")
    ax.plot(z, scad_prox(z, args.rho, 1.0, ScadParams(args.lam)), label="SCAD")
    ax.set_xlabel("z")
    ax.set_ylabel("threshold(z)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
