"""Continued-fraction representation of nu with geometric bias certificates.

u_n = p_0 + q_0/(p_{-1} + q_{-1}/(... + q_{-(n-1)}/p_{-n})) with the
autoregressive coefficients of X; v_n is the analogue for Y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dynamics import Policy, ar_coefficients, ar_coefficients_y
from ..env import DiscreteLaw, EnvStream
from .estimate import LyapEstimate


@dataclass(frozen=True)
class CertCF:
    C0: float
    h0: float
    h: float | None
    bound: float
    depth: int
    side: str = "u"


def _rate(p: Policy, g):
    lam, th = p.lam, p.theta
    c = (1 - lam) if lam <= th else (1 - th)
    return (c / (c + lam * th * g)) ** 2


def cf_certificate(p: Policy, C: float, depth: int, iid: bool = False,
                   law: DiscreteLaw | None = None, side: str = "u") -> CertCF:
    """Bias bound 0 < E ln u_depth - nu < C0 h^{depth+1} / (1 - h).

    ``h`` is the i.i.d. rate (an expectation over ``law``, the law of
    gamma_0 for the u side or zeta_0 for the v side); otherwise the
    worst-case rate h0 from the support bound C is used.
    """
    lam, th = p.lam, p.theta
    if lam * th == 0:
        raise ValueError("certificate needs lam*theta > 0")
    if not C > 1:
        raise ValueError("C must exceed 1")
    if side == "u":
        C0 = C**2 * (1 - lam + (1 - th + lam * th) * C**2) / (1 - lam + lam * th / C**2)
    else:
        C0 = C**2 * (1 - th + (1 - lam + lam * th) * C**2) / (1 - th + lam * th / C**2)
    h0 = float(_rate(p, C**-2)) if math.isfinite(C) else 1.0
    h = None
    if iid and law is not None:
        h = law.expect(lambda g: _rate(p, g))
    r = h if h is not None else h0
    bound = C0 * r ** (depth + 1) / (1 - r) if r < 1 and math.isfinite(C0) else math.inf
    return CertCF(C0, h0, h, bound, depth, side)


def _coefficients(p: Policy, eps, delta, side):
    # column j of the window is time t = j - (ncols - 1); returns coefficients for j >= 1
    if side == "u":
        return ar_coefficients(p, eps[:, 1:] * delta[:, 1:], delta[:, 1:] / delta[:, :-1])
    return ar_coefficients_y(p, eps[:, 1:] * delta[:, :-1], eps[:, 1:] / eps[:, :-1])


def cf_values(p: Policy, eps, delta, n: int, side: str = "u", z: float = 0.0):
    """u_n(z) (or v_n(z)) for each window row; windows need n+2 columns."""
    a, b = _coefficients(p, eps, delta, side)
    # a[:, -1] is time 0, a[:, -1-k] is time -k
    w = a[:, -1 - n] + b[:, -1 - n] * z
    for k in range(n - 1, -1, -1):
        w = a[:, -1 - k] + b[:, -1 - k] / w
    return w


def cf_paths(p: Policy, eps, delta, n_max: int, side: str = "u"):
    """Array of u_0..u_{n_max} per window (shape rows x (n_max+1))."""
    return np.stack([cf_values(p, eps, delta, n, side) for n in range(n_max + 1)], axis=1)


def nu_cf(p: Policy, stream: EnvStream, depth: int = 200, replications: int = 10**5,
          side: str = "u", chunk: int = 20000) -> LyapEstimate:
    """Monte Carlo mean of ln u_depth (or ln v_depth) with its bias certificate."""
    if not p.interior:
        raise ValueError("continued fractions need an interior policy")
    if not math.isfinite(stream.bound_C):
        raise ValueError("continued-fraction certificate needs a bounded-support stream")
    law = stream.gamma_law() if side == "u" else stream.zeta_law()
    cert = cf_certificate(p, stream.bound_C, depth, iid=stream.iid, law=law, side=side)
    src = stream.derive(f"cf-{side}")
    total, total2, count = 0.0, 0.0, 0
    while count < replications:
        m = min(chunk, replications - count)
        eps, delta = src.pairs(depth + 2, reps=m)
        vals = np.log(cf_values(p, eps, delta, depth, side))
        total += vals.sum()
        total2 += (vals**2).sum()
        count += m
    mean = total / count
    var = max(total2 / count - mean**2, 0.0) * count / (count - 1)
    return LyapEstimate(mean, "cf" if side == "u" else "cf-v", depth,
                        stderr=math.sqrt(var / count), bound=cert.bound, seed=stream.seed,
                        meta={"cert": cert, "replications": count})
