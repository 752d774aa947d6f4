"""The state recursion (X_n, Y_n) -> M_n (X_n, Y_n).

X is capital (currency), Y the collection value (art units).  A policy
invests a fraction ``lam`` of capital and sells a fraction ``theta`` of the
collection every period.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .env import EnvPair, EnvStream
from .errors import StateCollapseError

RENORM_EVERY = 64


@dataclass(frozen=True)
class Policy:
    lam: float
    theta: float

    def __post_init__(self):
        if not (0 <= self.lam <= 1 and 0 <= self.theta <= 1):
            raise ValueError(f"lambda and theta must lie in [0,1], got {self}")
        if self.lam + self.theta <= 0:
            raise ValueError("lambda + theta must be positive")

    @property
    def interior(self) -> bool:
        return 0 < self.lam < 1 and 0 < self.theta < 1

    @property
    def on_boundary(self) -> bool:
        return not self.interior

    def swapped(self) -> "Policy":
        return Policy(self.theta, self.lam)


@dataclass(frozen=True)
class CollectorState:
    x: float
    y: float

    def __post_init__(self):
        if self.x < 0 or self.y < 0 or self.x + self.y <= 0:
            raise ValueError(f"state must be nonnegative and nonzero, got {self}")


def step_matrix(p: Policy, e: EnvPair) -> np.ndarray:
    lam, th, eps, dl = p.lam, p.theta, e.epsilon, e.delta
    return np.array([[1 - lam + lam * th * eps * dl, th * dl],
                     [lam * (1 - th) * eps, 1 - th]])


def step_matrices(p: Policy, eps, delta) -> np.ndarray:
    """Vectorized step matrices, shape ``eps.shape + (2, 2)``."""
    eps = np.asarray(eps, dtype=float)
    delta = np.asarray(delta, dtype=float)
    lam, th = p.lam, p.theta
    out = np.empty(eps.shape + (2, 2))
    out[..., 0, 0] = 1 - lam + lam * th * eps * delta
    out[..., 0, 1] = th * delta
    out[..., 1, 0] = lam * (1 - th) * eps
    out[..., 1, 1] = 1 - th
    return out


def factor_matrices(p: Policy, e: EnvPair):
    """(sell, buy) with sell @ buy == step_matrix(p, e).

    ``buy`` acts first: invest lam*X, turning it into art at rate eps.  Then
    ``sell`` liquidates theta of the enlarged collection at rate delta.
    """
    sell = np.array([[p.theta * e.delta, 1.0], [1 - p.theta, 0.0]])
    buy = np.array([[p.lam * e.epsilon, 1.0], [1 - p.lam, 0.0]])
    return sell, buy


@dataclass
class LogTrajectory:
    """log X_k and log Y_k for k = 0..n, plus the draws used.

    ``offset`` is the accumulated log scale and ``state`` the final
    normalized state, so the true final state is exp(offset) * state.
    """

    log_x: np.ndarray
    log_y: np.ndarray
    eps: np.ndarray
    delta: np.ndarray
    offset: float
    state: np.ndarray

    @property
    def increments_x(self) -> np.ndarray:
        return np.diff(self.log_x)

    @property
    def increments_y(self) -> np.ndarray:
        return np.diff(self.log_y)

    @property
    def n(self) -> int:
        return len(self.eps)

    def final_state(self) -> np.ndarray:
        return math.exp(self.offset) * self.state

    def write_csv(self, path_or_file):
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            fh.write("# schema: artcollector-trajectory v1\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "logX", "logY", "epsilon", "delta"])
            for k in range(self.n + 1):
                e = repr(float(self.eps[k])) if k < self.n else ""
                d = repr(float(self.delta[k])) if k < self.n else ""
                w.writerow([k, repr(float(self.log_x[k])), repr(float(self.log_y[k])), e, d])
        finally:
            if own:
                fh.close()


def _run(a11, a12, a21, a22, x, y, renorm_every):
    n = len(a11)
    lx = np.empty(n + 1)
    ly = np.empty(n + 1)
    offset = 0.0
    with np.errstate(divide="ignore"):
        lx[0], ly[0] = np.log(x), np.log(y)
    for k in range(n):
        x, y = a11[k] * x + a12[k] * y, a21[k] * x + a22[k] * y
        if x == 0.0 and y == 0.0:
            raise StateCollapseError(f"state collapsed to (0,0) at step {k + 1}")
        with np.errstate(divide="ignore"):
            lx[k + 1] = offset + math.log(x) if x > 0 else -math.inf
            ly[k + 1] = offset + math.log(y) if y > 0 else -math.inf
        if (k + 1) % renorm_every == 0:
            s = max(x, y)
            offset += math.log(s)
            x, y = x / s, y / s
    return lx, ly, offset, np.array([x, y])


def iterate(p: Policy, stream: EnvStream, s0: CollectorState, n: int,
            renorm_every: int = RENORM_EVERY) -> LogTrajectory:
    """Apply M_0, ..., M_{n-1} to ``s0`` using the next n draws of ``stream``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    eps, delta = stream.pairs(n)
    M = step_matrices(p, eps, delta)
    lx, ly, off, st = _run(M[:, 0, 0].tolist(), M[:, 0, 1].tolist(), M[:, 1, 0].tolist(),
                           M[:, 1, 1].tolist(), float(s0.x), float(s0.y), renorm_every)
    return LogTrajectory(lx, ly, eps, delta, off, st)


def dual_iterate(p: Policy, stream: EnvStream, s0: CollectorState, n: int,
                 renorm_every: int = RENORM_EVERY) -> LogTrajectory:
    """Iterate the tilde system driven by (delta_k, eps_{k+1}).

    Consumes n+1 draws.  With Xt_0 = (1-lam) X_0 and Yt_0 = Y_0 + lam eps_0 X_0
    one has Xt_k = (1-lam) X_k and Yt_k = Y_{k+1} / (1-theta) for the primal
    run on the same draws.  ``log_x``/``log_y`` hold log Xt, log Yt.
    """
    if p.theta == 1:
        raise ValueError("dual iteration needs theta < 1")
    if n < 1:
        raise ValueError("n must be at least 1")
    eps, delta = stream.pairs(n + 1)
    lam, th = p.lam, p.theta
    d, e1 = delta[:-1], eps[1:]
    # Yt' = (1-th+lam th d e1) Yt + lam e1 Xt ;  Xt' = (1-lam) th d Yt + (1-lam) Xt
    a11 = 1 - th + lam * th * d * e1
    a12 = lam * e1
    a21 = (1 - lam) * th * d
    a22 = np.full(n, 1 - lam)
    x0 = (1 - lam) * s0.x
    y0 = s0.y + lam * eps[0] * s0.x
    ly, lx, off, st = _run(a11.tolist(), a12.tolist(), a21.tolist(), a22.tolist(),
                           float(y0), float(x0), renorm_every)
    return LogTrajectory(lx, ly, eps, delta, off, st[::-1].copy())


def ar_coefficients(p: Policy, gamma_n, d_n):
    """(p_n, q_n) with X_{n+1} = p_n X_n + q_n X_{n-1}; d_n = delta_n / delta_{n-1}."""
    gamma_n = np.asarray(gamma_n, dtype=float)
    d_n = np.asarray(d_n, dtype=float)
    lam, th = p.lam, p.theta
    pn = 1 - lam + lam * th * gamma_n + (1 - th) * d_n
    qn = -(1 - lam) * (1 - th) * d_n
    return pn, qn


def ar_coefficients_y(p: Policy, zeta_n, e_n):
    """(r_n, s_n) with Y_{n+1} = r_n Y_n + s_n Y_{n-1}; e_n = eps_n / eps_{n-1}."""
    if p.theta == 1:
        raise ValueError("theta = 1 empties the collection; the Y recursion is degenerate")
    zeta_n = np.asarray(zeta_n, dtype=float)
    e_n = np.asarray(e_n, dtype=float)
    lam, th = p.lam, p.theta
    rn = 1 - th + lam * th * zeta_n + (1 - lam) * e_n
    sn = -(1 - lam) * (1 - th) * e_n
    return rn, sn
