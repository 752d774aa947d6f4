"""Analytic upper and lower bounds on nu at a fixed policy.

All bounds are expectations over a short window of consecutive pairs.  For
streams with an exact window law the expectation is a finite sum;
otherwise it is a Monte Carlo mean with a standard error.

Window columns 0, 1, 2 hold times n-2, n-1, n.  The Y-side ("dual") bounds
use zeta_n = eps_n delta_{n-1} and e_n = eps_n / eps_{n-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Policy
from .env import EnvStream
from .meanfield import mu

WINDOW = 3


def _expect(stream: EnvStream, fn, mc_budget: int, key: str):
    if stream.finite:
        return stream.window_law(WINDOW).expect(fn), 0.0
    eps, delta = stream.derive(key).pairs(WINDOW, reps=int(mc_budget))
    vals = fn(eps, delta)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def _need_interior(p: Policy):
    if not p.interior:
        raise ValueError(f"bound needs an interior policy, got {p}")


def _x_terms(p, eps, delta):
    lam, th = p.lam, p.theta
    g_n = eps[:, 2] * delta[:, 2]
    g_n1 = eps[:, 1] * delta[:, 1]
    d_n = delta[:, 2] / delta[:, 1]
    d_n1 = delta[:, 1] / delta[:, 0]
    z_n1 = eps[:, 1] * delta[:, 0]
    return lam, th, g_n, g_n1, d_n, d_n1, z_n1


def _y_terms(p, eps, delta):
    lam, th = p.lam, p.theta
    z_n = eps[:, 2] * delta[:, 1]
    z_n1 = eps[:, 1] * delta[:, 0]
    e_n = eps[:, 2] / eps[:, 1]
    e_n1 = eps[:, 1] / eps[:, 0]
    g_n2 = eps[:, 0] * delta[:, 0]
    return lam, th, z_n, z_n1, e_n, e_n1, g_n2


def _art_x(p, eps, delta):
    lam, th, g_n, g_n1, d_n, _, _ = _x_terms(p, eps, delta)
    return np.log(1 - lam + lam * th * g_n
                  + (1 - th) * d_n * lam * th * g_n1 / (1 - lam + lam * th * g_n1))


def _nam1_x(p, eps, delta):
    lam, th, g_n, _, d_n, d_n1, z_n1 = _x_terms(p, eps, delta)
    frac = (lam * th * z_n1 + 1 - th) / ((1 - lam) / d_n1 + lam * th * z_n1 + 1 - th)
    return np.log(1 - lam + lam * th * g_n + (1 - th) * d_n * frac)


def _nam3_x(p, eps, delta):
    lam, th, g_n, g_n1, d_n, d_n1, _ = _x_terms(p, eps, delta)
    p_n = 1 - lam + lam * th * g_n + (1 - th) * d_n
    p_n1 = 1 - lam + lam * th * g_n1 + (1 - th) * d_n1
    return 0.5 * np.log(p_n * p_n1 - (1 - lam) * (1 - th) * d_n)


def _art_y(p, eps, delta):
    lam, th, z_n, z_n1, e_n, _, _ = _y_terms(p, eps, delta)
    return np.log(1 - th + lam * th * z_n
                  + (1 - lam) * e_n * lam * th * z_n1 / (1 - th + lam * th * z_n1))


def _nam1_y(p, eps, delta):
    # the lagged round trip here is gamma_{n-2} = zeta_{n-1} / e_{n-1}
    lam, th, z_n, _, e_n, e_n1, g_n2 = _y_terms(p, eps, delta)
    frac = (1 - lam + lam * th * g_n2) / (1 - lam + lam * th * g_n2 + (1 - th) / e_n1)
    return np.log(1 - th + lam * th * z_n + (1 - lam) * e_n * frac)


def _nam3_y(p, eps, delta):
    lam, th, z_n, z_n1, e_n, e_n1, _ = _y_terms(p, eps, delta)
    r_n = 1 - th + lam * th * z_n + (1 - lam) * e_n
    r_n1 = 1 - th + lam * th * z_n1 + (1 - lam) * e_n1
    return 0.5 * np.log(r_n * r_n1 - (1 - lam) * (1 - th) * e_n)


def bound_art_lower(p: Policy, stream: EnvStream, mc_budget: int = 10**6):
    """Lower bound from Y_n / X_n >= lam (1-theta) eps_{n-1} / (1 - lam + lam theta gamma_{n-1})."""
    _need_interior(p)
    return _expect(stream, lambda e, d: _art_x(p, e, d), mc_budget, "art")


def bound_nam1_upper(p: Policy, stream: EnvStream, mc_budget: int = 10**6):
    """Upper bound from X_n <= p_{n-1} X_{n-1} inserted in the lag term."""
    _need_interior(p)
    return _expect(stream, lambda e, d: _nam1_x(p, e, d), mc_budget, "nam1")


def bound_nam3_upper(p: Policy, stream: EnvStream, mc_budget: int = 10**6):
    """Half the expected log of the two-step growth bound X_{n+1} / X_{n-1}."""
    _need_interior(p)
    return _expect(stream, lambda e, d: _nam3_x(p, e, d), mc_budget, "nam3")


def _spectral_norm(p, eps, delta):
    lam, th = p.lam, p.theta
    a = 1 - lam + lam * th * eps * delta
    b = th * delta
    c = lam * (1 - th) * eps
    d = np.full_like(a, 1 - th)
    # largest singular value of [[a, b], [c, d]]
    s = a * a + b * b + c * c + d * d
    det = np.abs(a * d - b * c)
    return np.sqrt(0.5 * (s + np.sqrt(np.maximum(s * s - 4 * det * det, 0.0))))


def bound_ergodic_upper(p: Policy, stream: EnvStream, mc_budget: int = 10**6,
                        kind: str = "perron"):
    """E ln mu_0 with mu_0 the Perron root of M_0 (``kind='perron'``).

    ``kind='spectral'`` uses the operator 2-norm of M_0 instead, which is
    submultiplicative and therefore always a valid upper bound.  The
    Perron-root version is not: it fails for policies near (1, 1).
    """
    lam, th = p.lam, p.theta
    if kind == "perron":
        def fn(e, d):
            g = e[:, 0] * d[:, 0]
            trace = 2 - lam - th + g * lam * th
            return np.log(0.5 * (trace + np.sqrt((th - lam + lam * th * g) ** 2
                                                 + 4 * lam * th * (1 - th) * g)))
    elif kind == "spectral":
        def fn(e, d):
            return np.log(_spectral_norm(p, e[:, 0], d[:, 0]))
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return _expect(stream, fn, mc_budget, f"ergodic-{kind}")


def bound_logplus_upper(stream: EnvStream, mc_budget: int = 10**6):
    """E max(0, ln gamma_0); independent of the policy."""
    return _expect(stream, lambda e, d: np.maximum(np.log(e[:, 0] * d[:, 0]), 0.0),
                   mc_budget, "logplus")


def bound_nup_lower(p: Policy, stream: EnvStream, mc_budget: int = 10**6):
    """E ln(1 - lam + theta lam gamma_0), a lower bound near the theta = 1 edge."""
    if not (0 < p.lam < 1 and 0 <= p.theta < 1):
        raise ValueError("need lam in (0,1) and theta in [0,1)")
    lam, th = p.lam, p.theta
    return _expect(stream, lambda e, d: np.log(1 - lam + th * lam * e[:, 0] * d[:, 0]),
                   mc_budget, "nup")


@dataclass
class BoundsReport:
    policy: Policy
    side: str
    lower_art: float
    upper_nam1: float
    upper_nam3: float
    upper_ergodic: float
    upper_ergodic_spectral: float
    upper_logplus: float
    lower_nup: float
    stderr: dict = field(default_factory=dict)
    dual: "BoundsReport | None" = None

    LOWER = ("lower_art", "lower_nup")
    UPPER = ("upper_nam1", "upper_nam3", "upper_ergodic", "upper_ergodic_spectral",
             "upper_logplus")

    def entries(self):
        """(name, value, stderr) for this side and, if present, the dual side."""
        out = [(n, getattr(self, n), self.stderr.get(n, 0.0)) for n in self.LOWER + self.UPPER]
        if self.dual is not None:
            out += [("dual_" + n, getattr(self.dual, n), self.dual.stderr.get(n, 0.0))
                    for n in ("lower_art", "upper_nam1", "upper_nam3")]
        return out

    def violations(self, value: float, stderr: float = 0.0, k: float = 3.0,
                   skip=()):
        """Names of bounds that ``value`` breaks by more than k combined errors."""
        bad = []
        for name, b, se in self.entries():
            if name in skip:
                continue
            tol = k * math.hypot(stderr, se)
            if "lower" in name and value < b - tol:
                bad.append(name)
            if "upper" in name and value > b + tol:
                bad.append(name)
        return bad


def _report(p: Policy, stream: EnvStream, mc_budget: int, side: str) -> BoundsReport:
    if side == "x":
        fns = (_art_x, _nam1_x, _nam3_x)
    else:
        fns = (_art_y, _nam1_y, _nam3_y)
    names = ("lower_art", "upper_nam1", "upper_nam3")
    vals, ses = {}, {}
    for name, fn in zip(names, fns):
        vals[name], ses[name] = _expect(stream, lambda e, d, fn=fn: fn(p, e, d), mc_budget,
                                        f"{side}-{name}")
    for name, res in (("upper_ergodic", bound_ergodic_upper(p, stream, mc_budget)),
                      ("upper_ergodic_spectral",
                       bound_ergodic_upper(p, stream, mc_budget, kind="spectral")),
                      ("upper_logplus", bound_logplus_upper(stream, mc_budget))):
        vals[name], ses[name] = res
    if p.theta < 1:
        vals["lower_nup"], ses["lower_nup"] = bound_nup_lower(p, stream, mc_budget)
    else:
        vals["lower_nup"], ses["lower_nup"] = -math.inf, 0.0
    return BoundsReport(p, side, stderr=ses, **vals)


def bounds_dual(p: Policy, stream: EnvStream, mc_budget: int = 10**6) -> BoundsReport:
    """Y-side analogues built from zeta_n and e_n."""
    _need_interior(p)
    return _report(p, stream, mc_budget, "y")


def bounds_report(p: Policy, stream: EnvStream, mc_budget: int = 10**6) -> BoundsReport:
    _need_interior(p)
    rep = _report(p, stream, mc_budget, "x")
    rep.dual = bounds_dual(p, stream, mc_budget)
    return rep


def mean_field_log_mu(p: Policy, gamma: float) -> float:
    """ln mu for reference in tables; not a bound on nu in general."""
    return math.log(mu(p, gamma))
