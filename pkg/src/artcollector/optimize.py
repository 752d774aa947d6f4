"""Policy optimization: the one-dimensional Kelly problem on the edges,
the interior grid sweep with local refinement, and the Kelly-effect test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sopt

from .dynamics import Policy
from .env import DiscreteLaw, EnvMoments, EnvStream
from .lyapunov.boundary import edge_law
from .lyapunov.direct import run_lanes, summarize
from .lyapunov.estimate import LyapEstimate
from .lyapunov.projective import nu_transfer

CRITICAL_TOL = 1e-12


def _as_law(returns) -> DiscreteLaw:
    if isinstance(returns, DiscreteLaw):
        return returns
    v = np.asarray(returns, dtype=float).ravel()
    return DiscreteLaw(v, np.full(v.size, 1.0 / v.size))


def kelly_1d(returns, lam: float) -> float:
    """E ln(1 - lam + lam x) for scalar gross returns x (atoms or samples)."""
    if not 0 <= lam <= 1:
        raise ValueError("lam must lie in [0,1]")
    law = _as_law(returns)
    return law.expect(lambda x: np.log(1 - lam + lam * x))


@dataclass(frozen=True)
class KellyMax:
    lam_star: float
    value: float
    case: str          # "zero" | "interior" | "one"


def kelly_1d_max(returns, xtol: float = 1e-12) -> KellyMax:
    """Maximize E ln(1 - lam + lam x) over lam in [0,1].

    E x <= 1 gives lam* = 0; E(1/x) <= 1 gives lam* = 1; otherwise lam*
    solves E[1 / (1 - lam + lam x)] = 1, found by bisection.
    """
    law = _as_law(returns)
    mean = law.expect(lambda x: x)
    if mean <= 1:
        return KellyMax(0.0, 0.0, "zero")
    if law.expect(lambda x: 1 / x) <= 1:
        return KellyMax(1.0, law.expect(np.log), "one")

    def slope(lam):
        return law.expect(lambda x: (x - 1) / (1 - lam + lam * x))

    lam = sopt.bisect(slope, 0.0, 1.0, xtol=xtol)
    return KellyMax(lam, kelly_1d(law, lam), "interior")


@dataclass(frozen=True)
class BoundaryMax:
    edge: str          # "theta=1" | "lam=1" | "lam=0"
    policy: Policy
    value: float
    case: str


def _edge_law(stream: EnvStream, edge: str, mc_budget: int) -> DiscreteLaw:
    law = edge_law(stream, edge)
    if law is not None:
        return law
    eps, delta = stream.derive(f"edge-{edge}").pairs(mc_budget + 1)
    g = eps[1:] * delta[1:] if edge == "theta=1" else eps[1:] * delta[:-1]
    return _as_law(g)


def kelly_boundary_max(stream: EnvStream, edge: str = "theta=1",
                       mc_budget: int = 10**6) -> BoundaryMax:
    """Best policy on one edge: theta=1 (lam varies) or lam=1 (theta varies)."""
    if edge not in ("theta=1", "lam=1"):
        raise ValueError("edge must be 'theta=1' or 'lam=1'")
    k = kelly_1d_max(_edge_law(stream, edge, mc_budget))
    x = k.lam_star
    if x == 0:
        pol = Policy(0.0, 1.0) if edge == "theta=1" else Policy(1.0, 0.0)
    else:
        pol = Policy(x, 1.0) if edge == "theta=1" else Policy(1.0, x)
    return BoundaryMax(edge, pol, k.value, k.case)


def best_boundary(stream: EnvStream, mc_budget: int = 10**6) -> BoundaryMax:
    """Maximum of nu over the whole boundary (lam=0 and theta=0 edges give 0)."""
    cands = [kelly_boundary_max(stream, e, mc_budget) for e in ("theta=1", "lam=1")]
    best = max(cands, key=lambda b: b.value)
    if best.value <= 0:
        return BoundaryMax("lam=0", Policy(0.0, 1.0), 0.0, "zero")
    return best


# ---------------------------------------------------------------------------
# Kelly effect


@dataclass(frozen=True)
class KellyDecision:
    verdict: str       # KELLY_EFFECT | INCONCLUSIVE
    margin: float
    interior_value: float
    certificate: float
    boundary_value: float

    def summary(self) -> str:
        return (f"{self.verdict} margin={self.margin:.6g} interior={self.interior_value:.9g} "
                f"cert={self.certificate:.3g} boundary={self.boundary_value:.9g}")


def kelly_effect_test(interior: LyapEstimate, boundary_value: float,
                      k: float = 3.0) -> KellyDecision:
    """KELLY_EFFECT when interior value minus its certificate beats the boundary."""
    cert = interior.error(k)
    margin = interior.value - cert - boundary_value
    verdict = "KELLY_EFFECT" if margin > 0 else "INCONCLUSIVE"
    return KellyDecision(verdict, margin, interior.value, cert, boundary_value)


# ---------------------------------------------------------------------------
# regimes


@dataclass(frozen=True)
class RegimeReport:
    tag: str
    boundary_case: str
    notes: tuple = ()


def classify_regime(m: EnvMoments) -> RegimeReport:
    g = m.gamma
    notes = []
    if abs(g - 1) <= CRITICAL_TOL:
        tag = "CRITICAL"
    elif g < 1:
        tag = "SUBCRITICAL"
    else:
        tag = "SUPERCRITICAL"
    if g <= 1:
        case = "lam*=0 on theta=1"
    elif m.mean_inv_gamma <= 1:
        case = "corner (1,1) on theta=1"
    else:
        case = "interior lam* on theta=1"
    if tag == "SUBCRITICAL":
        if m.cov_eps_delta >= 0:
            notes.append("nu <= 0 on the whole policy square")
        else:
            notes.append("negative covariance: no sign guarantee for nu")
    if tag == "SUPERCRITICAL":
        notes.append("nu > 0 for small lam near theta = 1")
        notes.append("mean-field rate mu > 1 in the interior")
    return RegimeReport(tag, case, tuple(notes))


# ---------------------------------------------------------------------------
# grid search


def grid_axis(resolution: int) -> np.ndarray:
    """Interior points i / (N+1), i = 1..N."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    return np.arange(1, resolution + 1) / (resolution + 1)


@dataclass
class PolicyGrid:
    resolution: int
    lams: np.ndarray
    thetas: np.ndarray
    values: np.ndarray          # values[i, j] at (lams[i], thetas[j])
    certs: np.ndarray
    iters: np.ndarray
    converged: np.ndarray
    method: str
    cell_argmax: Policy
    cell_max: float
    argmax: Policy
    argmax_estimate: LyapEstimate
    boundary_max: BoundaryMax
    kelly: KellyDecision | None = None
    refine_path: list = field(default_factory=list)

    def rows(self):
        for i, lam in enumerate(self.lams):
            for j, th in enumerate(self.thetas):
                yield (float(lam), float(th), float(self.values[i, j]), float(self.certs[i, j]),
                       int(self.iters[i, j]), bool(self.converged[i, j]))


def first_argmax(values: np.ndarray) -> tuple[int, int]:
    """Index of the largest finite value; ties go to the smallest lam, then theta."""
    flat = int(np.nanargmax(values))
    i, j = np.unravel_index(flat, values.shape)
    return int(i), int(j)


def certified_estimate(p: Policy, stream: EnvStream, n_iter: int = 40,
                       min_iter: int = 20000, reps: int = 30) -> LyapEstimate:
    """Transfer operator for finite i.i.d. streams, long direct runs otherwise."""
    if stream.iid and stream.atoms:
        return nu_transfer(p, stream, n_iter)
    res = run_lanes([p.lam], [p.theta], stream.derive("certified"), reps=reps, rel_tol=1e-3,
                    min_iter=min_iter, max_iter=10 * min_iter)
    return summarize(res.values[0], res.stops[0], res.converged[0], p, stream.seed)


def refine_argmax(stream: EnvStream, start: Policy, step: float, tol: float = 1e-4,
                  estimator=certified_estimate):
    """3x3 pattern search that halves its step when the centre is best."""
    cache = {}

    def val(lam, th):
        key = (round(lam, 12), round(th, 12))
        if key not in cache:
            cache[key] = estimator(Policy(lam, th), stream)
        return cache[key]

    c = (start.lam, start.theta)
    path = [c]
    while step > tol:
        best = c
        for dl in (-1, 0, 1):
            for dt in (-1, 0, 1):
                q = (min(max(c[0] + dl * step, step / 2), 1 - step / 2),
                     min(max(c[1] + dt * step, step / 2), 1 - step / 2))
                if val(*q).value > val(*best).value:
                    best = q
        if best == c:
            step /= 2
        else:
            c = best
            path.append(c)
    return Policy(*c), val(*c), path


def grid_search(stream: EnvStream, resolution: int = 50, rel_tol: float = 1e-3,
                estimator: str = "direct", *, reps: int = 30, min_iter: int = 5000,
                max_iter: int = 10**6, n_iter: int = 30, refine: bool = True,
                refine_tol: float = 1e-4) -> PolicyGrid:
    """Evaluate nu on the N x N interior grid i/(N+1) and locate its maximum.

    ``estimator='direct'`` runs ``reps`` trajectories per cell with the
    relative-change stopping rule (all cells share random numbers);
    ``'transfer'`` uses the transfer operator with ``n_iter`` iterations.
    The cell maximum is then refined by a pattern search with a certified
    estimator, and the boundary maximum comes from the edge closed forms.
    """
    axis = grid_axis(resolution)
    L, T = np.meshgrid(axis, axis, indexing="ij")
    shape = L.shape
    if estimator == "direct":
        res = run_lanes(L.ravel(), T.ravel(), stream.derive("grid"), reps=reps,
                        rel_tol=rel_tol, min_iter=min_iter, max_iter=max_iter)
        values = res.values.mean(axis=1).reshape(shape)
        certs = (res.values.std(axis=1, ddof=1) / math.sqrt(reps)).reshape(shape)
        iters = res.stops.max(axis=1).reshape(shape)
        conv = res.converged.all(axis=1).reshape(shape)
    elif estimator == "transfer":
        values = np.empty(shape)
        certs = np.empty(shape)
        for idx in np.ndindex(shape):
            e = nu_transfer(Policy(L[idx], T[idx]), stream, n_iter)
            values[idx], certs[idx] = e.value, e.bound
        iters = np.full(shape, n_iter)
        conv = np.ones(shape, dtype=bool)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    i, j = first_argmax(values)
    cell = Policy(float(axis[i]), float(axis[j]))
    if refine:
        arg, est, path = refine_argmax(stream, cell, 1.0 / (resolution + 1), refine_tol)
    else:
        arg, est, path = cell, certified_estimate(cell, stream), [(cell.lam, cell.theta)]
    bmax = best_boundary(stream)
    grid = PolicyGrid(resolution, axis, axis.copy(), values, certs, iters, conv, estimator,
                      cell, float(values[i, j]), arg, est, bmax, refine_path=path)
    grid.kelly = kelly_effect_test(est, bmax.value)
    return grid
