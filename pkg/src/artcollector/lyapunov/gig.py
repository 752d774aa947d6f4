"""nu on the diagonal lam = theta for independent gamma rates.

With eps ~ Gamma(h, 2/r) and delta ~ Gamma(h, 2/s) the stationary ratio
Y/X at lam = theta is GIG(-h, r/lam, s(1-lam)/lam), independent of the
current pair, so nu(lam, lam) = E ln(1 - lam + lam^2 eps delta + lam delta xi).
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

from ..env import GigSpec, gig_sample, log_bessel_k
from ..errors import QuadratureError
from .estimate import LyapEstimate


def gig_diagonal_integral(g: GigSpec, lam: float):
    """Bessel-integral value of nu(lam, lam) when r = s; returns (value, abserr)."""
    if g.rate_r != g.rate_s:
        raise ValueError("the integral formula needs r = s")
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0,1)")
    h, s = g.shape_h, g.rate_s
    log_pref = -0.5 * h * math.log(1 - lam) - log_bessel_k(h, s * math.sqrt(1 - lam) / lam)
    a, b = s / lam, s * (1 - lam) / lam

    def f(x):
        return math.exp(log_pref + (h - 1) * math.log(x) - 0.5 * (a * x + b / x)) * math.log(x)

    mode = ((h - 1) + math.sqrt((h - 1) ** 2 + a * b)) / a
    total, err = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            for lo, hi in ((0.0, mode), (mode, np.inf)):
                v, e = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=200)
                total += v
                err += e
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"GIG diagonal integral did not converge: {exc}")
    return total, err


def gig_diagonal_samples(g: GigSpec, lam: float, n: int, rng):
    h, r, s = g.shape_h, g.rate_r, g.rate_s
    eps = rng.gamma(h, 2 / r, n)
    delta = rng.gamma(h, 2 / s, n)
    xi = gig_sample(-h, r / lam, s * (1 - lam) / lam, rng, size=n)
    return np.log(1 - lam + lam**2 * eps * delta + lam * delta * xi)


def nu_gig_diagonal(g: GigSpec, lam: float, mc_budget: int = 10**6, seed=None,
                    chunk: int = 10**6) -> LyapEstimate:
    """Monte Carlo value of nu(lam, lam) with stderr.

    When r = s the Bessel-integral value is stored in ``meta['quadrature']``
    (with ``meta['quad_error']``) and ``meta['agree']`` records whether the
    two lie within 3 stderr plus the quadrature error.
    """
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0,1)")
    rng = np.random.default_rng(seed)
    s1 = s2 = 0.0
    done = 0
    while done < mc_budget:
        m = min(chunk, mc_budget - done)
        v = gig_diagonal_samples(g, lam, m, rng)
        s1 += v.sum()
        s2 += (v * v).sum()
        done += m
    mean = s1 / done
    se = math.sqrt(max(s2 / done - mean**2, 0.0) / (done - 1))
    meta = {"lam": lam, "samples": done}
    if g.rate_r == g.rate_s:
        q, qe = gig_diagonal_integral(g, lam)
        meta.update(quadrature=q, quad_error=qe, agree=abs(q - mean) <= 3 * se + qe)
    return LyapEstimate(mean, "gig", done, stderr=se, seed=seed, meta=meta)
