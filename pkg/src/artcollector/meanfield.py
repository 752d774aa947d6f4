"""Mean-field dynamics (U_n, V_n) = (E X_n, E Y_n) and its growth rate mu."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Policy

EDGE_TOL = 1e-12


@dataclass(frozen=True)
class MeanSpec:
    alpha: float
    beta: float
    gamma: float | None = None

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if self.gamma is None:
            object.__setattr__(self, "gamma", self.alpha * self.beta)
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


def mean_matrix(p: Policy, m: MeanSpec) -> np.ndarray:
    lam, th, a, b = p.lam, p.theta, m.alpha, m.beta
    return np.array([[1 - lam + m.gamma * lam * th, b * th],
                     [a * lam * (1 - th), 1 - th]])


def mu(p: Policy, gamma: float, alpha_beta: float | None = None) -> float:
    """Top eigenvalue of the mean matrix.

    ``alpha_beta`` (the product E eps * E delta) defaults to ``gamma``,
    which is the independent case.  When they differ the off-diagonal
    product uses alpha_beta while the (1,1) entry uses gamma.
    """
    lam, th = p.lam, p.theta
    ab = gamma if alpha_beta is None else alpha_beta
    trace = 2 - lam - th + gamma * lam * th
    if alpha_beta is None and gamma >= 1:
        disc = (lam + th - gamma * lam * th) ** 2 + 4 * (gamma - 1) * lam * th
    else:
        disc = (th - lam + lam * th * gamma) ** 2 + 4 * lam * th * (1 - th) * ab
    return 0.5 * (trace + math.sqrt(disc))


def mu_gradient(p: Policy, gamma: float):
    """(d mu / d lam, d mu / d theta) from the closed-form derivative."""
    def d_lam(lam, th):
        xi = gamma - 1
        root = math.sqrt((lam + th - gamma * lam * th) ** 2 + 4 * xi * lam * th)
        # derivative of the gamma >= 1 form; algebraically valid for any gamma
        inner = (lam + th - gamma * lam * th) * (1 - gamma * th) + 2 * xi * th
        return 0.5 * (-1 + gamma * th + inner / root)

    return d_lam(p.lam, p.theta), d_lam(p.theta, p.lam)


def mu_gradient_signs(p: Policy, gamma: float):
    if not (p.lam * p.theta != 0 and p.theta != 1 and p.lam != 1):
        raise ValueError("gradient signs need an interior policy")
    g = mu_gradient(p, gamma)
    return tuple(int(np.sign(v)) for v in g)


def mean_trajectory(p: Policy, m: MeanSpec, u0: float, v0: float, n: int) -> np.ndarray:
    """Rows (U_k, V_k) for k = 0..n."""
    if u0 < 0 or v0 < 0 or u0 + v0 <= 0:
        raise ValueError("need U_0, V_0 >= 0 with U_0 + V_0 > 0")
    M = mean_matrix(p, m)
    out = np.empty((n + 1, 2))
    out[0] = u0, v0
    for k in range(n):
        out[k + 1] = M @ out[k]
    return out


@dataclass(frozen=True)
class GammaOneLimits:
    u_inf: float
    v_inf: float
    trend: str          # "U up, V down" | "U down, V up" | "constant"
    threshold: float    # the lambda at which both sequences stay constant


def gamma_one_limits(p: Policy, m: MeanSpec, u0: float, v0: float) -> GammaOneLimits:
    if abs(m.gamma - 1) > EDGE_TOL or abs(m.alpha * m.beta - 1) > EDGE_TOL:
        raise ValueError("limits require gamma = alpha*beta = 1")
    lam, th, a, b = p.lam, p.theta, m.alpha, m.beta
    den = th + lam * (1 - th)
    u_inf = th * (u0 + b * v0) / den
    v_inf = lam * (1 - th) * (a * u0 + v0) / den
    if u0 == 0 or th == 1:
        thr = math.inf
    else:
        thr = b * th * v0 / ((1 - th) * u0)
    if math.isfinite(thr) and abs(lam - thr) <= EDGE_TOL * max(1.0, abs(thr)):
        trend = "constant"
    elif lam < thr:
        trend = "U up, V down"
    else:
        trend = "U down, V up"
    return GammaOneLimits(u_inf, v_inf, trend, thr)


def mu_first_order(p: Policy, xi: float) -> float:
    den = p.lam + p.theta - p.lam * p.theta
    if not den > 0:
        raise ValueError("need lam + theta - lam*theta > 0")
    return 1 + xi * p.lam * p.theta / den
