"""Sweep nu over the interior policy grid and write a heatmap CSV (and PNG)."""

import argparse
from pathlib import Path

import numpy as np

from artcollector.env import BernSpec, bern_stream
from artcollector.optimize import grid_search


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=50)
    ap.add_argument("--estimator", default="direct", choices=["direct", "transfer"])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--outdir", default="out")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    g = grid_search(bern_stream(BernSpec(0.3, 0.2, 2.0), seed=args.seed), args.resolution,
                    estimator=args.estimator, refine=False)
    rows = np.array([r[:4] for r in g.rows()])
    np.savetxt(out / "heatmap.csv", rows, delimiter=",", header="lambda,theta,nu,cert",
               comments="")
    print(f"cell argmax ({g.cell_argmax.lam:.4f}, {g.cell_argmax.theta:.4f}) "
          f"nu={g.cell_max:.6f}; boundary max {g.boundary_max.value:.6f}")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5.5, 4.5))
        h = 0.5 / (args.resolution + 1)
        box = (g.lams[0] - h, g.lams[-1] + h, g.thetas[0] - h, g.thetas[-1] + h)
        im = ax.imshow(g.values.T, origin="lower", extent=box, cmap="viridis")
        ax.contour(g.lams, g.thetas, g.values.T, levels=[0.0], colors="w", linewidths=0.8)
        ax.plot(g.cell_argmax.lam, g.cell_argmax.theta, "r+", ms=10)
        ax.set_xlabel("lambda")
        ax.set_ylabel("theta")
        fig.colorbar(im, ax=ax, label="nu")
        fig.tight_layout()
        fig.savefig(out / "heatmap.png", dpi=120)


if __name__ == "__main__":
    main()
