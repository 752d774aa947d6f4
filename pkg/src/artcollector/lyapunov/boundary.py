"""Closed forms of nu on the edges of the policy square."""

from __future__ import annotations

import math

import numpy as np

from ..dynamics import Policy
from ..env import EnvStream
from .estimate import LyapEstimate


def edge_law(stream: EnvStream, edge: str):
    """Law of the scalar return on an edge: gamma_0 for theta=1, zeta_0 for lam=1."""
    return stream.gamma_law() if edge == "theta=1" else stream.zeta_law()


def nu_boundary(p: Policy, stream: EnvStream, mc_budget: int = 10**6) -> LyapEstimate:
    """nu on the boundary of the policy square.

    lam=0 or theta=0 gives 0.  theta=1 gives E ln(1-lam+lam*gamma_0) and
    lam=1 gives E ln(1-theta+theta*zeta_0) with zeta_0 = eps_0 delta_{-1}.
    Finite streams are summed exactly, gamma streams by Gauss-Laguerre
    nodes, anything else by Monte Carlo with ``mc_budget`` draws.
    """
    lam, th = p.lam, p.theta
    if lam == 0 or th == 0:
        return LyapEstimate(0.0, "boundary", 1, bound=0.0, seed=stream.seed,
                            meta={"edge": "lam=0" if lam == 0 else "theta=0"})
    if th == 1:
        edge, w = "theta=1", lam
    elif lam == 1:
        edge, w = "lam=1", th
    else:
        raise ValueError(f"{p} is not on the boundary")

    def fn(g):
        return np.log(1 - w + w * g)

    law = edge_law(stream, edge)
    if law is not None:
        return LyapEstimate(law.expect(fn), "boundary", 1, bound=0.0, seed=stream.seed,
                            meta={"edge": edge, "exact": True})
    eps, delta = stream.derive("boundary").pairs(int(mc_budget) + 1)
    g = eps[1:] * delta[1:] if edge == "theta=1" else eps[1:] * delta[:-1]
    vals = fn(g)
    return LyapEstimate(float(vals.mean()), "boundary", int(mc_budget),
                        stderr=float(vals.std(ddof=1) / math.sqrt(len(vals))),
                        seed=stream.seed, meta={"edge": edge, "exact": False})
