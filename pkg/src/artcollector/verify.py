"""Golden-value regression over published reference numbers.

Each check computes a quantity and compares it with a reference value at a
pinned tolerance.  ``kind='le'`` checks measured <= expected + tol,
``kind='gt'`` checks measured > expected; everything else is |diff| <= tol.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .dynamics import Policy
from .env import BernSpec, GammaStream, GigSpec, bern_stream, env_moments
from .lyapunov import nu_boundary, nu_gig_diagonal, nu_transfer
from .optimize import best_boundary, kelly_boundary_max, kelly_effect_test, refine_argmax

BERN_MAIN = BernSpec(0.3, 0.2, 2.0)
POLICY_MAIN = Policy(0.265, 0.284)
GIG_KEY = GigSpec(4.5, 8.0, 8.0)


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    expected: float
    tol: float
    kind: str = "abs"
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.measured):
            return False
        if self.kind == "le":
            return self.measured <= self.expected + self.tol
        if self.kind == "gt":
            return self.measured > self.expected
        return abs(self.measured - self.expected) <= self.tol

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        op = {"le": "<=", "gt": ">"}.get(self.kind, "~")
        return (f"{tag} {self.name}: measured={self.measured:.10g} {op} "
                f"expected={self.expected:.10g} tol={self.tol:.3g} ({self.seconds:.1f}s)")


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def _bern_checks():
    out = []
    s95 = bern_stream(BernSpec(0.95, 0.95, 1.1))
    s75 = bern_stream(BernSpec(0.75, 0.75, 1.3))
    main = bern_stream(BERN_MAIN)
    m95, m75, mm = env_moments(s95), env_moments(s75), env_moments(main)
    out += [Check("bern(0.95,0.95;1.1) gamma", m95.gamma, 1.050625, 1e-12),
            Check("bern(0.95,0.95;1.1) mean 1/gamma", m95.mean_inv_gamma, 0.962089, 1e-6),
            Check("bern(0.75,0.75;1.3) mean 1/gamma", m75.mean_inv_gamma, 1.105194, 1e-6),
            Check("bern(0.3,0.2;2) gamma", mm.gamma, 1.265, 1e-12),
            Check("bern(0.3,0.2;2) E ln gamma", mm.mean_log_gamma, 0.25 * math.log(0.0576),
                  1e-12)]
    b95, t = _timed(lambda: kelly_boundary_max(s95))
    out += [Check("bern(0.95,0.95;1.1) edge lam*", b95.policy.lam, 1.0, 0.0, seconds=t),
            Check("bern(0.95,0.95;1.1) edge max", b95.value, 0.044314, 1e-5, seconds=t)]
    b75, t = _timed(lambda: kelly_boundary_max(s75))
    out += [Check("bern(0.75,0.75;1.3) edge lam*", b75.policy.lam, 0.3305, 5e-4, seconds=t),
            Check("bern(0.75,0.75;1.3) edge max", b75.value, 0.016326, 1e-5, seconds=t)]
    bm, t = _timed(lambda: kelly_boundary_max(main))
    out += [Check("bern(0.3,0.2;2) edge lam*", bm.policy.lam, 0.132304, 1e-6, seconds=t),
            Check("bern(0.3,0.2;2) edge max", bm.value, 0.0160933, 1e-6, seconds=t)]
    return out


def _transfer_checks():
    main = bern_stream(BERN_MAIN)
    e20, t = _timed(lambda: nu_transfer(POLICY_MAIN, main, 20))
    out = [Check("transfer vartheta", e20.meta["vartheta"], 0.6088577, 1e-7, seconds=t),
           Check("transfer 20-step certificate", e20.bound, 3.004159e-5, 1e-9, "le", t),
           Check("transfer nu_20 within own certificate", e20.value, 0.019919065598, e20.bound,
                 seconds=t)]
    e60, t = _timed(lambda: nu_transfer(POLICY_MAIN, main, 60))
    out.append(Check("transfer converged nu", e60.value, 0.019919081, 1e-6, seconds=t))
    return out


def _kelly_checks():
    main = bern_stream(BERN_MAIN)

    def run():
        _, est, _ = refine_argmax(main, POLICY_MAIN, 0.02, 1e-4)
        return kelly_effect_test(est, best_boundary(main).value)

    dec, t = _timed(run)
    return [Check("bern(0.3,0.2;2) kelly margin", dec.margin, 3e-3, 0.0, "gt", t)]


def _gig_checks(mc_budget: int, seed: int):
    out = []
    est, t = _timed(lambda: nu_gig_diagonal(GIG_KEY, 0.69, mc_budget=mc_budget, seed=seed))
    q = est.meta["quadrature"]
    out += [Check("gig nu(0.69,0.69) quadrature", q, 0.062518, 5e-4, seconds=t),
            Check("gig nu(0.69,0.69) monte carlo", est.value, 0.062518, 3 * est.stderr,
                  seconds=t)]
    stream = GammaStream(GIG_KEY, seed=seed)
    bnd, t = _timed(lambda: nu_boundary(Policy(0.52831, 1.0), stream))
    out.append(Check("gig boundary nu(0.52831,1)", bnd.value, 0.061395, 5e-4, seconds=t))
    dec = kelly_effect_test(est, kelly_boundary_max(stream).value)
    out.append(Check("gig kelly margin", dec.margin, 0.0, 0.0, "gt"))
    return out


def _grid_checks(seed: int):
    from .optimize import grid_search

    g, t = _timed(lambda: grid_search(bern_stream(BERN_MAIN, seed=seed), 50))
    lam, th = g.cell_argmax.lam, g.cell_argmax.theta
    return [Check("grid cell argmax lam in window", lam, 0.265, 0.02, seconds=t),
            Check("grid cell argmax theta in window", th, 0.284, 0.02, seconds=t)]


def run_checks(full: bool = False, mc_budget: int = 4 * 10**6, seed: int = 0):
    """All quick checks; ``full`` adds the 50 x 50 grid sweep."""
    checks = _bern_checks() + _transfer_checks() + _kelly_checks() + _gig_checks(mc_budget, seed)
    if full:
        checks += _grid_checks(seed)
    return checks
