"""Convergence of the estimators at one policy: running direct averages,
continued-fraction depth, transfer iterates with their certificates."""

import argparse
import csv
from pathlib import Path

import numpy as np

from artcollector.dynamics import CollectorState, Policy, iterate
from artcollector.env import BernSpec, bern_stream
from artcollector.lyapunov import cf_values, nu_transfer


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=0.265)
    ap.add_argument("--theta", type=float, default=0.284)
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--outdir", default="out")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    p = Policy(args.lam, args.theta)
    spec = BernSpec(0.3, 0.2, 2.0)

    tr = iterate(p, bern_stream(spec, seed=args.seed), CollectorState(1.0, 1.0), args.steps)
    k = np.unique(np.geomspace(10, args.steps, 60).astype(int))
    running = tr.log_x[k] / k

    e, d = bern_stream(spec, seed=args.seed + 1).pairs(82, reps=50_000)
    depths = np.arange(0, 81, 2)
    cf_mean = [float(np.log(cf_values(p, e, d, n)).mean()) for n in depths]

    tf = nu_transfer(p, bern_stream(spec), 40)
    certs = [nu_transfer(p, bern_stream(spec), n).bound for n in range(41)]

    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "n", "value", "cert"])
        w.writerows(("direct", int(n), float(v), "") for n, v in zip(k, running))
        w.writerows(("cf", int(n), v, "") for n, v in zip(depths, cf_mean))
        w.writerows(("transfer", n, v, c) for n, (v, c) in
                    enumerate(zip(tf.meta["iterates"], certs)))
    print(f"transfer nu_40 = {tf.value:.10f} (cert {tf.bound:.1e})")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
        axes[0].semilogx(k, running)
        axes[0].axhline(tf.value, color="k", lw=0.6)
        axes[0].set_title("direct: log X_k / k")
        axes[1].plot(depths, cf_mean)
        axes[1].axhline(tf.value, color="k", lw=0.6)
        axes[1].set_title("continued fraction: E ln u_n")
        axes[2].semilogy(range(41), certs)
        axes[2].set_title("transfer certificate")
        for ax in axes:
            ax.set_xlabel("n")
        fig.tight_layout()
        fig.savefig(out / "convergence.png", dpi=120)


if __name__ == "__main__":
    main()
