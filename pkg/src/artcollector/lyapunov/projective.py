"""Projective action of positive 2x2 matrices: Hilbert metric, Birkhoff
contraction, Moebius maps, the ratio estimator and the transfer operator.

Directions in the positive quadrant are parametrised by s = ln(x1/x2); in
this chart the Hilbert metric is |s - s'|.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev

from ..dynamics import Policy, step_matrices, step_matrix
from ..env import EnvStream
from .estimate import LyapEstimate

TREE_CAP = 10**6


@dataclass(frozen=True)
class ProjPoint:
    """A direction (x1, x2) in the open positive quadrant, l1-normalized."""

    x1: float
    x2: float

    def __post_init__(self):
        if not (self.x1 > 0 and self.x2 > 0):
            raise ValueError("projective point must have positive components")
        s = self.x1 + self.x2
        object.__setattr__(self, "x1", self.x1 / s)
        object.__setattr__(self, "x2", self.x2 / s)

    @property
    def log_ratio(self) -> float:
        return math.log(self.x1 / self.x2)

    def apply(self, A) -> "ProjPoint":
        v = np.asarray(A) @ np.array([self.x1, self.x2])
        return ProjPoint(float(v[0]), float(v[1]))


def hilbert_metric(x, y) -> float:
    """log max_{i,j} x_i y_j / (x_j y_i) for positive vectors."""
    x = np.asarray([x.x1, x.x2] if isinstance(x, ProjPoint) else x, dtype=float)
    y = np.asarray([y.x1, y.x2] if isinstance(y, ProjPoint) else y, dtype=float)
    r = np.log(x) - np.log(y)
    return float(r.max() - r.min())


def birkhoff_psi(A) -> float:
    A = np.asarray(A, dtype=float)
    if (A <= 0).any():
        raise ValueError("Birkhoff coefficient needs strictly positive entries")
    n, m = A.shape
    return min(A[i, k] * A[j, l] / (A[i, l] * A[j, k])
               for i, j in itertools.product(range(n), repeat=2)
               for k, l in itertools.product(range(m), repeat=2))


def birkhoff_tau(A) -> float:
    """Contraction coefficient of A in the Hilbert metric."""
    r = math.sqrt(birkhoff_psi(A))
    return (1 - r) / (1 + r)


def moebius_apply(A, x):
    """T_A(x) = (a11 x + a12) / (a21 x + a22); x may be +inf or an array."""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (A[..., 0, 0] * x + A[..., 0, 1]) / (A[..., 1, 0] * x + A[..., 1, 1])
    return np.where(np.isinf(x), A[..., 0, 0] / A[..., 1, 0], out)


# ---------------------------------------------------------------------------
# ratio estimator


def ratio_samples(p: Policy, eps, delta):
    """Per-window (integrand, pathwise bias bound) for the ratio estimator.

    A window holds n+2 consecutive pairs for times -(n+1)..0.  The ratio
    X/Y is T_{M_{-1}...M_{-(n+1)}}(+inf); the integrand is
    ln(1 - lam + lam theta gamma_0 + theta delta_0 / ratio).
    """
    M = step_matrices(p, eps[:, :-1], delta[:, :-1])
    r = M[:, 0, 0, 0] / M[:, 0, 1, 0]
    span = np.abs(np.log(M[:, 0, 0, 0] / M[:, 0, 1, 0]) - np.log(M[:, 0, 0, 1] / M[:, 0, 1, 1]))
    contraction = np.ones(len(r))
    for j in range(1, M.shape[1]):
        A = M[:, j]
        r = (A[:, 0, 0] * r + A[:, 0, 1]) / (A[:, 1, 0] * r + A[:, 1, 1])
        psi = A[:, 0, 1] * A[:, 1, 0] / (A[:, 0, 0] * A[:, 1, 1])
        psi = np.minimum(psi, 1 / psi)
        contraction *= (1 - np.sqrt(psi)) / (1 + np.sqrt(psi))
    g0 = eps[:, -1] * delta[:, -1]
    vals = np.log(1 - p.lam + p.lam * p.theta * g0 + p.theta * delta[:, -1] / r)
    return vals, contraction * span, r


def nu_via_ratio(p: Policy, stream: EnvStream, depth: int = 60,
                 replications: int = 10**5, chunk: int = 20000) -> LyapEstimate:
    """Monte Carlo over the stationary ratio reached after ``depth`` backward steps.

    ``bound`` is the Monte Carlo mean of a pathwise bound on the truncation
    error: the product of Birkhoff coefficients times the Hilbert diameter
    of the innermost image (the integrand is 1-Lipschitz in ln ratio).  For
    finite i.i.d. streams the exact expectation vartheta^depth * E diam is
    used instead.
    """
    if not p.interior:
        raise ValueError("ratio estimator needs an interior policy")
    src = stream.derive("ratio")
    s1 = s2 = b = 0.0
    count = 0
    while count < replications:
        m = min(chunk, replications - count)
        eps, delta = src.pairs(depth + 2, reps=m)
        vals, bnd, _ = ratio_samples(p, eps, delta)
        s1 += vals.sum()
        s2 += (vals**2).sum()
        b += bnd.sum()
        count += m
    mean = s1 / count
    se = math.sqrt(max(s2 / count - mean**2, 0.0) / (count - 1))
    bound = b / count
    if stream.iid and stream.atoms:
        atoms = stream.atoms
        vt = contraction_theta(p, atoms)
        diam = sum(w * hilbert_diameter(step_matrix(p, a)) for a, w in atoms)
        bound = vt**depth * diam
    return LyapEstimate(mean, "ratio", depth, stderr=se, bound=bound, seed=stream.seed,
                        meta={"replications": count})


def hilbert_diameter(A) -> float:
    """Diameter of A applied to the positive quadrant."""
    A = np.asarray(A, dtype=float)
    return abs(math.log(A[0, 0] * A[1, 1] / (A[0, 1] * A[1, 0])))


# ---------------------------------------------------------------------------
# transfer operator


def _atoms_of(p: Policy, atoms_or_stream):
    if isinstance(atoms_or_stream, EnvStream):
        atoms = atoms_or_stream.atoms
        if not atoms or not atoms_or_stream.iid:
            raise ValueError("transfer operator needs a finite-support i.i.d. stream")
    else:
        atoms = list(atoms_or_stream)
    mats = [step_matrix(p, a) for a, _ in atoms]
    probs = np.array([w for _, w in atoms], dtype=float)
    for A in mats:
        if (A <= 0).any():
            raise ValueError(f"step matrix at {p} has nonpositive entries (boundary policy)")
    return mats, probs


def contraction_theta(p: Policy, atoms) -> float:
    """vartheta = sum_j p_j tau(A_j)."""
    mats, probs = _atoms_of(p, atoms)
    return float(sum(w * birkhoff_tau(A) for A, w in zip(mats, probs)))


@dataclass(frozen=True)
class TransferCertificate:
    vartheta: float
    spread: float     # sum_l p_l h(xbar, A_l xbar)
    n: int
    bound: float


def transfer_certificate(p: Policy, atoms, n: int, xbar=(1.0, 1.0)) -> TransferCertificate:
    """vartheta^n / (1 - vartheta) * sum_l p_l h(xbar, A_l xbar)."""
    mats, probs = _atoms_of(p, atoms)
    vt = float(sum(w * birkhoff_tau(A) for A, w in zip(mats, probs)))
    x = np.asarray(xbar, dtype=float)
    spread = float(sum(w * hilbert_metric(x, A @ x) for A, w in zip(mats, probs)))
    return TransferCertificate(vt, spread, n, vt**n / (1 - vt) * spread)


def _act(A, s):
    # projective action in the chart s = ln(x1/x2)
    es = np.exp(np.clip(s, -700, 700))
    return np.log((A[0, 0] * es + A[0, 1]) / (A[1, 0] * es + A[1, 1]))


def _log_norm_gain(A, s, norm):
    es = np.exp(np.clip(s, -700, 700))
    v1 = A[0, 0] * es + A[0, 1]
    v2 = A[1, 0] * es + A[1, 1]
    if norm == "l1":
        return np.log(v1 + v2) - np.log(es + 1)
    if norm == "max":
        return np.log(np.maximum(v1, v2)) - np.log(np.maximum(es, 1))
    raise ValueError(f"unknown norm {norm!r}")


def _transfer_tree(mats, probs, n, s0, norm):
    pts = np.array([s0])
    wts = np.array([1.0])
    iterates = []
    for k in range(n + 1):
        iterates.append(float(sum(w * np.dot(wts, _log_norm_gain(A, pts, norm))
                                  for A, w in zip(mats, probs))))
        if k == n:
            break
        pts = np.concatenate([_act(A, pts) for A in mats])
        wts = np.concatenate([w * wts for w in probs])
        pts, inv = np.unique(pts, return_inverse=True)
        wts = np.bincount(inv, weights=wts)
    return iterates, 0.0


def _transfer_chebyshev(mats, probs, n, s0, norm, degree):
    if norm != "l1":
        raise ValueError("the interpolating transfer operator supports the l1 norm only")
    ends = [float(_act(A, t)) for A in mats for t in (-745.0, 745.0)]
    lo, hi = min(ends), max(ends)
    test = np.linspace(lo, hi, 4 * degree + 7)

    def F(s):
        return sum(w * _log_norm_gain(A, s, norm) for A, w in zip(mats, probs))

    def fit(fn):
        g = Chebyshev.interpolate(fn, degree, domain=[lo, hi])
        return g, float(np.max(np.abs(g(test) - fn(test))))

    iterates = [float(F(np.array([s0]))[0])]
    g, err = fit(F)
    total_err = err
    for k in range(1, n + 1):
        prev = g
        iterates.append(float(sum(w * prev(_act(A, np.array([s0])))[0]
                                  for A, w in zip(mats, probs))))
        if k == n:
            break
        g, err = fit(lambda s: sum(w * prev(_act(A, s)) for A, w in zip(mats, probs)))
        total_err += err
    return iterates, total_err


def nu_transfer(p: Policy, atoms, n_iter: int = 20, norm: str = "l1", mode: str = "auto",
                cap: int = TREE_CAP, degree: int = 64, xbar=(1.0, 1.0)) -> LyapEstimate:
    """nu_n = sum_j p_j (T^n f_j)(xbar) with f_j(x) = log||A_j x||, ||x|| = 1.

    ``mode='tree'`` evaluates the b^n branch words exactly, merging equal
    directions; ``mode='chebyshev'`` iterates T on a Chebyshev interpolant
    of the direction chart and adds the accumulated interpolation error
    (measured on a dense test grid) to the certificate.  ``auto`` picks
    the tree while b^n stays below ``cap``.
    """
    if not p.interior:
        raise ValueError("transfer operator needs an interior policy")
    mats, probs = _atoms_of(p, atoms)
    cert = transfer_certificate(p, atoms, n_iter, xbar)
    s0 = math.log(xbar[0] / xbar[1])
    if mode == "auto":
        mode = "tree" if len(mats) ** n_iter <= cap else "chebyshev"
    if mode == "tree":
        iterates, interp = _transfer_tree(mats, probs, n_iter, s0, norm)
    elif mode == "chebyshev":
        iterates, interp = _transfer_chebyshev(mats, probs, n_iter, s0, norm, degree)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return LyapEstimate(iterates[-1], "transfer", max(n_iter, 1), bound=cert.bound + interp,
                        meta={"vartheta": cert.vartheta, "rate_bound": cert.bound,
                              "interp_error": interp, "iterates": iterates, "mode": mode,
                              "norm": norm})
