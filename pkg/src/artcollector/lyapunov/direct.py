"""Direct trajectory estimator of nu with the relative-change stopping rule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dynamics import CollectorState, Policy
from ..env import EnvStream
from ..errors import ConvergenceError
from .estimate import LyapEstimate

HISTORY = 8


@dataclass
class LaneResult:
    values: np.ndarray      # (cells, reps) final nu_k
    stops: np.ndarray       # (cells, reps) stopping index k
    converged: np.ndarray   # (cells, reps) stopping rule met before max_iter
    trailing: np.ndarray    # (cells, reps, HISTORY) last nu_k values, oldest first


def run_lanes(lams, thetas, stream: EnvStream, *, reps: int, rel_tol: float,
              min_iter: int, max_iter: int, s0=(1.0, 1.0), chunk: int = 1024) -> LaneResult:
    """Run reps trajectories for every (lam, theta) cell simultaneously.

    Lane r of every cell sees the same environment draws (common random
    numbers), which keeps neighbouring cells comparable on a grid.  Each
    lane stops on its own once |nu_k - nu_{k-1}| < rel_tol |nu_k| with
    k >= min_iter, or at max_iter.
    """
    lams = np.asarray(lams, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    cells = lams.size
    L = cells * reps
    lane = np.arange(L)
    la = np.repeat(lams, reps)
    ta = np.repeat(thetas, reps)
    rep = np.tile(np.arange(reps), cells)
    s = max(s0)
    x = np.full(L, s0[0] / s)
    y = np.full(L, s0[1] / s)
    logn = np.full(L, math.log(s))
    prev = np.zeros(L)
    hist = np.zeros((L, HISTORY))

    values = np.full(L, np.nan)
    stops = np.zeros(L, dtype=np.int64)
    conv = np.zeros(L, dtype=bool)
    trailing = np.full((L, HISTORY), np.nan)

    # constant per-lane coefficients
    c11 = 1 - la
    c_lt = la * ta
    c21 = la * (1 - ta)
    c22 = 1 - ta

    k = 0
    while lane.size and k < max_iter:
        m = min(chunk, max_iter - k)
        E, D = stream.pairs(m, reps=reps)
        for j in range(m):
            e = E[rep, j]
            d = D[rep, j]
            xn = (c11 + c_lt * e * d) * x + ta * d * y
            yn = c21 * e * x + c22 * y
            nrm = np.maximum(xn, yn)
            logn += np.log(nrm)
            x = xn / nrm
            y = yn / nrm
            k += 1
            nu = logn / k
            hist[:, k % HISTORY] = nu
            if k >= min_iter:
                rule = np.abs(nu - prev) < rel_tol * np.abs(nu)
                done = rule | (k == max_iter)
                if done.any():
                    idx = lane[done]
                    values[idx] = nu[done]
                    stops[idx] = k
                    conv[idx] = rule[done]
                    order = (np.arange(1, HISTORY + 1) + k) % HISTORY
                    trailing[idx] = hist[done][:, order]
                    keep = ~done
                    lane, la, ta, rep = lane[keep], la[keep], ta[keep], rep[keep]
                    c11, c_lt, c21, c22 = c11[keep], c_lt[keep], c21[keep], c22[keep]
                    x, y, logn, nu, hist = x[keep], y[keep], logn[keep], nu[keep], hist[keep]
                    if not lane.size:
                        break
            prev = nu
        # the inner loop may have broken out early; remaining draws are discarded

    shape = (cells, reps)
    return LaneResult(values.reshape(shape), stops.reshape(shape), conv.reshape(shape),
                      trailing.reshape(shape + (HISTORY,)))


def summarize(values, stops, converged, p: Policy, seed, trailing=None) -> LyapEstimate:
    values = np.asarray(values, dtype=float)
    reps = values.size
    se = float(values.std(ddof=1) / math.sqrt(reps)) if reps > 1 else None
    meta = {"reps": reps, "converged": bool(np.all(converged)),
            "min_stop": int(np.min(stops)), "lam": p.lam, "theta": p.theta}
    if trailing is not None:
        meta["trailing"] = trailing
    return LyapEstimate(float(values.mean()), "direct", int(np.max(stops)), stderr=se,
                        seed=seed, meta=meta)


def nu_direct(p: Policy, stream: EnvStream, rel_tol: float = 1e-3, max_iter: int = 10**6,
              *, reps: int = 30, min_iter: int = 1000,
              s0: CollectorState = CollectorState(1.0, 1.0), strict: bool = True) -> LyapEstimate:
    """Average of ``reps`` independent running estimates nu_k = log||S_k|| / k.

    The stopping rule only measures convergence of each running mean; the
    reported ``stderr`` comes from the spread across replications.  With
    ``strict`` a ConvergenceError carrying the trailing nu_k sequence is
    raised when any replication reaches ``max_iter``.
    """
    if not p.interior:
        raise ValueError("nu_direct needs an interior policy; use nu_boundary on the edges")
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    if min_iter > max_iter:
        raise ValueError("min_iter exceeds max_iter")
    res = run_lanes([p.lam], [p.theta], stream, reps=reps, rel_tol=rel_tol,
                    min_iter=min_iter, max_iter=max_iter, s0=(s0.x, s0.y))
    est = summarize(res.values[0], res.stops[0], res.converged[0], p, stream.seed)
    if strict and not res.converged.all():
        bad = int(np.argmin(res.converged[0]))
        raise ConvergenceError(
            f"stopping rule not met within max_iter={max_iter} at {p}",
            estimate=est, trailing=res.trailing[0, bad].tolist())
    return est
