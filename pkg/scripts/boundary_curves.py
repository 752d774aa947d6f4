"""nu on the edges theta=1 and lam=1 for the BERN examples, with the edge maxima."""

import argparse
import csv
from pathlib import Path

import numpy as np

from artcollector.dynamics import Policy
from artcollector.env import BernSpec, bern_stream
from artcollector.lyapunov import nu_boundary
from artcollector.optimize import kelly_boundary_max

SPECS = {"bern-0.95": BernSpec(0.95, 0.95, 1.1), "bern-0.75": BernSpec(0.75, 0.75, 1.3),
         "bern-main": BernSpec(0.3, 0.2, 2.0)}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=201)
    ap.add_argument("--outdir", default="out")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    x = np.linspace(0, 1, args.points)
    curves = {}
    with open(out / "boundary_curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stream", "edge", "t", "nu"])
        for name, spec in SPECS.items():
            s = bern_stream(spec)
            for edge in ("theta=1", "lam=1"):
                pol = (lambda t: Policy(t, 1.0)) if edge == "theta=1" else (lambda t: Policy(1.0, t))
                vals = [0.0 if t == 0 else nu_boundary(pol(t), s).value for t in x]
                curves[name, edge] = vals
                w.writerows((name, edge, float(t), v) for t, v in zip(x, vals))
                b = kelly_boundary_max(s, edge)
                print(f"{name:10s} {edge:8s} argmax {b.policy} value {b.value:.6f} ({b.case})")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        for (name, edge), vals in curves.items():
            ax.plot(x, vals, ls="-" if edge == "theta=1" else "--", label=f"{name} {edge}")
        ax.axhline(0, color="k", lw=0.5)
        ax.set_xlabel("free fraction on the edge")
        ax.set_ylabel("nu")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out / "boundary_curves.png", dpi=120)


if __name__ == "__main__":
    main()
