"""Random environments (epsilon_n, delta_n).

``epsilon`` is the buy rate (art units per unit of currency) and ``delta``
the sell rate (currency per art unit).  Streams are seeded, stateful,
single-consumer objects; ``clone``/``derive`` give independent copies.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .errors import QuadratureError, QuadratureWarning

DEBUG = bool(os.environ.get("ARTCOLLECTOR_DEBUG"))


@dataclass(frozen=True)
class EnvPair:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not (self.epsilon > 0 and self.delta > 0):
            raise ValueError(f"rates must be positive, got {self}")

    @property
    def gamma(self) -> float:
        return self.epsilon * self.delta


@dataclass(frozen=True)
class BernSpec:
    eps_low: float
    delta_low: float
    high: float

    def __post_init__(self):
        if not 0 < self.eps_low < 1:
            raise ValueError(f"eps_low must lie in (0,1), got {self.eps_low}")
        if not 0 < self.delta_low < 1:
            raise ValueError(f"delta_low must lie in (0,1), got {self.delta_low}")
        if not self.high > 1:
            raise ValueError(f"high must exceed 1, got {self.high}")


@dataclass(frozen=True)
class GigSpec:
    shape_h: float
    rate_r: float
    rate_s: float

    def __post_init__(self):
        if not (self.shape_h > 0 and self.rate_r > 0 and self.rate_s > 0):
            raise ValueError(f"h, r, s must be positive, got {self}")


@dataclass(frozen=True)
class DiscreteLaw:
    """A scalar law given by atoms and weights (exact or quadrature nodes)."""

    values: np.ndarray
    weights: np.ndarray

    def expect(self, fn) -> float:
        return float(np.dot(self.weights, fn(self.values)))


@dataclass(frozen=True)
class WindowLaw:
    """Joint law of k consecutive pairs; row i is one window."""

    eps: np.ndarray
    delta: np.ndarray
    prob: np.ndarray

    def expect(self, fn) -> float:
        return float(np.dot(self.prob, fn(self.eps, self.delta)))


def bern_atoms(spec: BernSpec) -> list[tuple[EnvPair, float]]:
    return [
        (EnvPair(e, d), 0.25)
        for e in (spec.eps_low, spec.high)
        for d in (spec.delta_low, spec.high)
    ]


def _derive_seed(seed, key) -> int:
    words = [] if seed is None else [int(seed)]
    words += [b for b in str(key).encode()]
    ss = np.random.SeedSequence(words if seed is not None else None)
    return int(ss.generate_state(1, dtype=np.uint32)[0])


class EnvStream:
    """Base class for seeded stationary ergodic sources of (epsilon, delta).

    Subclasses implement ``_draw(reps, n)`` returning two arrays of shape
    ``(reps, n)`` where row r continues the lane r of previous calls.
    """

    kind = "custom-ergodic"
    iid = False
    independent_margins = False

    def __init__(self, seed=None):
        self.seed = seed
        self.reset()

    def reset(self):
        self._rng = np.random.default_rng(self.seed)
        self._lanes = None

    # construction -----------------------------------------------------
    def clone(self, seed="same"):
        raise NotImplementedError

    def derive(self, key):
        """Independent copy whose seed is a deterministic function of ``key``."""
        return self.clone(seed=_derive_seed(self.seed, key))

    # drawing ----------------------------------------------------------
    def pairs(self, n: int, reps: int | None = None):
        """Next ``n`` pairs, shape ``(n,)`` or ``(reps, n)`` per lane."""
        eps, delta = self._draw(1 if reps is None else reps, n)
        if DEBUG:
            c = self.bound_C
            ok = (eps > 1 / c) & (eps < c) & (delta > 1 / c) & (delta < c)
            assert ok.all(), "environment draw outside the declared bound"
        if reps is None:
            return eps[0], delta[0]
        return eps, delta

    def draw(self) -> EnvPair:
        e, d = self.pairs(1)
        return EnvPair(float(e[0]), float(d[0]))

    # laws -------------------------------------------------------------
    @property
    def atoms(self):
        return None

    @property
    def finite(self) -> bool:
        return False

    def window_law(self, k: int) -> WindowLaw:
        raise NotImplementedError(f"{type(self).__name__} has no exact window law")

    def gamma_law(self) -> DiscreteLaw | None:
        """Law of gamma_0 = eps_0 * delta_0, or None if unavailable."""
        if not self.finite:
            return None
        w = self.window_law(1)
        return DiscreteLaw(w.eps[:, 0] * w.delta[:, 0], w.prob)

    def zeta_law(self) -> DiscreteLaw | None:
        """Law of zeta_0 = eps_0 * delta_{-1}."""
        if not self.finite:
            return None
        w = self.window_law(2)
        return DiscreteLaw(w.eps[:, 1] * w.delta[:, 0], w.prob)

    def describe(self) -> dict:
        return {"kind": self.kind, "seed": self.seed}


def _bound_from_values(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(max(v.max(), 1.0 / v.min()) * (1 + 1e-9))


class FiniteStream(EnvStream):
    """I.i.d. pairs drawn from a finite list of atoms."""

    kind = "finite-support"
    iid = True

    def __init__(self, atoms, seed=None, spec: BernSpec | None = None):
        self._atoms = [(EnvPair(float(a.epsilon), float(a.delta)), float(p)) for a, p in atoms]
        probs = np.array([p for _, p in self._atoms])
        if (probs < 0).any() or abs(probs.sum() - 1) > 1e-12:
            raise ValueError("atom probabilities must be nonnegative and sum to 1")
        self._eps = np.array([a.epsilon for a, _ in self._atoms])
        self._delta = np.array([a.delta for a, _ in self._atoms])
        self._p = probs / probs.sum()
        self.spec = spec
        self.bound_C = _bound_from_values(np.r_[self._eps, self._delta])
        self.independent_margins = _is_product(self._eps, self._delta, self._p)
        super().__init__(seed)

    def clone(self, seed="same"):
        return FiniteStream(self._atoms, self.seed if seed == "same" else seed, self.spec)

    def _draw(self, reps, n):
        idx = self._rng.choice(len(self._p), size=(reps, n), p=self._p)
        return self._eps[idx], self._delta[idx]

    @property
    def atoms(self):
        return list(self._atoms)

    @property
    def finite(self) -> bool:
        return True

    def window_law(self, k: int) -> WindowLaw:
        m = len(self._p)
        grids = np.meshgrid(*[np.arange(m)] * k, indexing="ij")
        idx = np.stack([g.ravel() for g in grids], axis=1)
        return WindowLaw(self._eps[idx], self._delta[idx], np.prod(self._p[idx], axis=1))

    def describe(self) -> dict:
        if self.spec is not None:
            s = self.spec
            return {"kind": "bern", "eps_low": s.eps_low, "delta_low": s.delta_low,
                    "high": s.high, "seed": self.seed}
        return {"kind": self.kind, "seed": self.seed, "atoms": len(self._atoms)}


def _is_product(eps, delta, p) -> bool:
    joint = {}
    me, md = {}, {}
    for e, d, w in zip(eps, delta, p):
        joint[(e, d)] = joint.get((e, d), 0.0) + w
        me[e] = me.get(e, 0.0) + w
        md[d] = md.get(d, 0.0) + w
    return all(abs(joint.get((e, d), 0.0) - we * wd) < 1e-12
               for e, we in me.items() for d, wd in md.items())


def bern_stream(spec: BernSpec, seed=None) -> FiniteStream:
    return FiniteStream(bern_atoms(spec), seed=seed, spec=spec)


def constant_stream(epsilon: float, delta: float, seed=None) -> FiniteStream:
    return FiniteStream([(EnvPair(epsilon, delta), 1.0)], seed=seed)


class GammaStream(EnvStream):
    """Independent eps ~ Gamma(h, 2/r) and delta ~ Gamma(h, 2/s), i.i.d. in time.

    Support is unbounded, so ``bound_C`` is infinite; operations needing a
    finite bound reject this stream.
    """

    kind = "gamma-gig"
    iid = True
    independent_margins = True
    bound_C = math.inf

    def __init__(self, spec: GigSpec, seed=None, law_nodes: int = 96):
        self.spec = spec
        self.law_nodes = law_nodes
        super().__init__(seed)

    def clone(self, seed="same"):
        return GammaStream(self.spec, self.seed if seed == "same" else seed, self.law_nodes)

    def _draw(self, reps, n):
        h, r, s = self.spec.shape_h, self.spec.rate_r, self.spec.rate_s
        eps = self._rng.gamma(h, 2.0 / r, size=(reps, n))
        delta = self._rng.gamma(h, 2.0 / s, size=(reps, n))
        return eps, delta

    def gamma_law(self) -> DiscreteLaw:
        # tensor generalized Gauss-Laguerre rule for the product of two gammas
        h, r, s = self.spec.shape_h, self.spec.rate_r, self.spec.rate_s
        x, w = special.roots_genlaguerre(self.law_nodes, h - 1)
        w = w / math.gamma(h)
        vals = np.outer(x * 2 / r, x * 2 / s).ravel()
        wts = np.outer(w, w).ravel()
        return DiscreteLaw(vals, wts / wts.sum())

    zeta_law = gamma_law

    def describe(self) -> dict:
        g = self.spec
        return {"kind": "gamma-gig", "h": g.shape_h, "r": g.rate_r, "s": g.rate_s,
                "seed": self.seed}


class MarkovStream(EnvStream):
    """Pairs modulated by a hidden finite Markov chain.

    ``state_atoms[i]`` lists the (EnvPair, prob) emitted in state i.  Each
    lane starts from the stationary distribution of ``transition``.
    """

    kind = "custom-ergodic"
    iid = False
    independent_margins = False

    def __init__(self, transition, state_atoms, seed=None, label: dict | None = None):
        P = np.asarray(transition, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] != len(state_atoms):
            raise ValueError("transition must be square and match state_atoms")
        if (P < 0).any() or not np.allclose(P.sum(axis=1), 1, atol=1e-12):
            raise ValueError("transition rows must be probability vectors")
        self.P = P
        self.state_atoms = [[(EnvPair(a.epsilon, a.delta), float(p)) for a, p in sa]
                            for sa in state_atoms]
        amax = max(len(sa) for sa in self.state_atoms)
        S = len(self.state_atoms)
        self._eps = np.ones((S, amax))
        self._delta = np.ones((S, amax))
        self._cum = np.ones((S, amax))
        for i, sa in enumerate(self.state_atoms):
            probs = np.array([p for _, p in sa])
            if abs(probs.sum() - 1) > 1e-12:
                raise ValueError(f"state {i} atom probabilities must sum to 1")
            self._eps[i, :len(sa)] = [a.epsilon for a, _ in sa]
            self._delta[i, :len(sa)] = [a.delta for a, _ in sa]
            self._cum[i, :len(sa)] = np.cumsum(probs)
        self._cumP = np.cumsum(P, axis=1)
        w, v = np.linalg.eig(P.T)
        pi = np.real(v[:, np.argmin(abs(w - 1))])
        self.stationary = pi / pi.sum()
        vals = [a.epsilon for sa in self.state_atoms for a, _ in sa]
        vals += [a.delta for sa in self.state_atoms for a, _ in sa]
        self.bound_C = _bound_from_values(vals)
        self.label = label
        super().__init__(seed)

    def clone(self, seed="same"):
        return MarkovStream(self.P, self.state_atoms, self.seed if seed == "same" else seed,
                            self.label)

    def _draw(self, reps, n):
        rng = self._rng
        if self._lanes is None or len(self._lanes) != reps:
            u = rng.random(reps)
            self._lanes = np.searchsorted(np.cumsum(self.stationary), u, side="right")
            self._lanes = np.minimum(self._lanes, len(self.stationary) - 1)
        state = self._lanes
        eps = np.empty((reps, n))
        delta = np.empty((reps, n))
        for t in range(n):
            u = rng.random(reps)
            k = (u[:, None] >= self._cum[state]).sum(axis=1)
            eps[:, t] = self._eps[state, k]
            delta[:, t] = self._delta[state, k]
            u = rng.random(reps)
            state = np.minimum((u[:, None] >= self._cumP[state]).sum(axis=1), len(self.P) - 1)
        self._lanes = state
        return eps, delta

    @property
    def finite(self) -> bool:
        return True

    def window_law(self, k: int) -> WindowLaw:
        S = len(self.P)
        # entries: (prob, final state, eps tuple, delta tuple)
        entries = [(self.stationary[i], i, (), ()) for i in range(S)]
        for pos in range(k):
            nxt = []
            for pr, st, es, ds in entries:
                for a, pa in self.state_atoms[st]:
                    base = (pr * pa, es + (a.epsilon,), ds + (a.delta,))
                    if pos == k - 1:
                        nxt.append((base[0], st, base[1], base[2]))
                    else:
                        for j in range(S):
                            if self.P[st, j] > 0:
                                nxt.append((base[0] * self.P[st, j], j, base[1], base[2]))
            entries = nxt
        prob = np.array([e[0] for e in entries])
        eps = np.array([e[2] for e in entries])
        delta = np.array([e[3] for e in entries])
        return WindowLaw(eps, delta, prob)

    def describe(self) -> dict:
        out = dict(self.label or {"kind": self.kind})
        out["seed"] = self.seed
        return out


def markov_bern_stream(spec: BernSpec, stay: float = 0.9, seed=None) -> MarkovStream:
    """Two-regime example whose one-step marginal equals BERN(spec).

    In regime 0 epsilon is low with probability 3/4, in regime 1 with
    probability 1/4; delta is low with probability 1/2 in both.  The regime
    persists with probability ``stay``, so epsilon is serially dependent
    while each single pair has the BERN law.
    """
    if not 0 <= stay < 1:
        raise ValueError("stay must lie in [0,1)")

    def regime(p_low):
        pe = {spec.eps_low: p_low, spec.high: 1 - p_low}
        pd = {spec.delta_low: 0.5, spec.high: 0.5}
        return [(EnvPair(e, d), we * wd) for e, we in pe.items() for d, wd in pd.items()]

    P = [[stay, 1 - stay], [1 - stay, stay]]
    label = {"kind": "markov", "eps_low": spec.eps_low, "delta_low": spec.delta_low,
             "high": spec.high, "stay": stay}
    return MarkovStream(P, [regime(0.75), regime(0.25)], seed=seed, label=label)


class DualStream(EnvStream):
    """The swapped-and-shifted sequence (delta_n, eps_{n+1}) of a base stream."""

    def __init__(self, base: EnvStream):
        self.base = base
        self.kind = base.kind
        self.bound_C = base.bound_C
        self.iid = base.iid
        # for i.i.d. bases delta_n and eps_{n+1} come from different draws
        self.independent_margins = base.iid or base.independent_margins
        self.seed = base.seed
        self._carry = None

    def reset(self):
        self.base.reset()
        self._carry = None

    def clone(self, seed="same"):
        return DualStream(self.base.clone(seed))

    def _draw(self, reps, n):
        if self._carry is None or self._carry[0].shape[0] != reps:
            e0, d0 = self.base.pairs(1, reps=reps)
            self._carry = (e0[:, -1:], d0[:, -1:])
        e, d = self.base.pairs(n, reps=reps)
        e_all = np.concatenate([self._carry[0], e], axis=1)
        d_all = np.concatenate([self._carry[1], d], axis=1)
        self._carry = (e_all[:, -1:], d_all[:, -1:])
        return d_all[:, :-1], e_all[:, 1:]

    @property
    def finite(self) -> bool:
        return self.base.finite

    @property
    def atoms(self):
        if not (self.base.iid and self.base.finite):
            return None
        w = self.base.window_law(1)
        md, me = {}, {}
        for e, d, p in zip(w.eps[:, 0], w.delta[:, 0], w.prob):
            md[d] = md.get(d, 0.0) + p
            me[e] = me.get(e, 0.0) + p
        return [(EnvPair(d, e), pd * pe) for d, pd in md.items() for e, pe in me.items()]

    def window_law(self, k: int) -> WindowLaw:
        w = self.base.window_law(k + 1)
        return WindowLaw(w.delta[:, :-1], w.eps[:, 1:], w.prob)

    def gamma_law(self):
        return self.base.zeta_law()

    def zeta_law(self):
        return self.base.gamma_law()

    def describe(self) -> dict:
        out = self.base.describe()
        out["dual"] = True
        return out


def dual_stream(stream: EnvStream) -> EnvStream:
    return DualStream(stream)


# ---------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class EnvMoments:
    alpha: float
    beta: float
    gamma: float
    mean_inv_gamma: float
    mean_log_gamma: float
    cov_eps_delta: float
    exact: bool = True
    stderr: dict = field(default_factory=dict)


def env_moments(stream: EnvStream, n_samples: int | None = None,
                lanes: int = 64) -> EnvMoments:
    """Exact moments when available, Monte Carlo when ``n_samples`` is given.

    Finite streams are summed over their atoms and gamma streams use closed
    forms.  The Monte Carlo path splits the budget over independent lanes
    and reports the standard error of the lane means, which stays honest
    for serially dependent streams.
    """
    if n_samples is None and stream.finite:
        w = stream.window_law(1)
        e, d, p = w.eps[:, 0], w.delta[:, 0], w.prob
        a, b = float(p @ e), float(p @ d)
        g = float(p @ (e * d))
        return EnvMoments(a, b, g, float(p @ (1 / (e * d))), float(p @ np.log(e * d)),
                          g - a * b)
    if n_samples is None and isinstance(stream, GammaStream):
        h, r, s = stream.spec.shape_h, stream.spec.rate_r, stream.spec.rate_s
        a, b = 2 * h / r, 2 * h / s
        inv = r * s / (4 * (h - 1) ** 2) if h > 1 else math.inf
        return EnvMoments(a, b, a * b, inv,
                          float(2 * special.digamma(h) + math.log(4 / (r * s))), 0.0)
    if n_samples is None:
        raise ValueError("no exact moments for this stream: supply n_samples")
    per = max(int(n_samples) // lanes, 2)
    e, d = stream.derive("moments").pairs(per, reps=lanes)
    g = e * d
    a_hat, b_hat = e.mean(), d.mean()
    cols = {"alpha": e, "beta": d, "gamma": g, "mean_inv_gamma": 1 / g,
            "mean_log_gamma": np.log(g), "cov_eps_delta": (e - a_hat) * (d - b_hat)}
    vals = {k: float(v.mean()) for k, v in cols.items()}
    se = {k: float(v.mean(axis=1).std(ddof=1) / math.sqrt(lanes)) for k, v in cols.items()}
    return EnvMoments(exact=False, stderr=se, **vals)


# ---------------------------------------------------------------------------
# gamma / GIG laws and the Bessel function


def gamma_sample(h: float, scale_a: float, rng, size=None):
    """Draw(s) with density f_{h,a}(x) = x^{h-1} e^{-x/a} / (Gamma(h) a^h)."""
    if not (h > 0 and scale_a > 0):
        raise ValueError("h and scale_a must be positive")
    return rng.gamma(h, scale_a, size=size)


def _qawf(f, x):
    with warnings.catch_warnings():
        # QAWF warns about its own tolerance; judge the result by its error estimate
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, 0, np.inf, weight="cos", wvar=x, epsabs=1e-300,
                              epsrel=1e-10, limlst=200)


def _log_k_cosine(order, x, rtol=1e-8):
    # K_v(x) = Gamma(v+1/2) (2/x)^v / sqrt(pi) * I,  I = int_0^inf cos(xu) (1+u^2)^{-v-1/2} du.
    # Integrating I by parts twice gives an equivalent integrand decaying like
    # u^{-2v-3}, which QAWF handles far better for small orders.
    log_pref = special.gammaln(order + 0.5) + order * math.log(2 / x) - 0.5 * math.log(math.pi)
    # |cos| <= 1 caps I at sqrt(pi) Gamma(v) / (2 Gamma(v + 1/2))
    cap = math.exp(0.5 * math.log(math.pi) + special.gammaln(order)
                   - special.gammaln(order + 0.5) - math.log(2)) if order > 0 else math.inf
    c = (2 * order + 1) / x**2
    forms = (
        (lambda u: (1 + u * u) ** (-order - 0.5), 1.0),
        (lambda u: (1 + u * u) ** (-order - 2.5) * (1 - (2 * order + 2) * u * u), c),
    )
    for f, scale in forms:
        val, err = _qawf(f, x)
        val, err = val * scale, err * scale
        if 0 < val <= cap and 0 <= err <= rtol * val:
            return log_pref + math.log(val)
    return None


def _log_k_cosh(order, x):
    # K_v(x) = int_0^inf exp(-x cosh t) cosh(v t) dt, with e^{-x} factored out
    def logf(t):
        return -x * (math.cosh(t) - 1) + order * t

    peak = math.asinh(order / x) if order > 0 else 0.0
    top = max(peak, 1.0)
    while logf(top) > logf(peak) - 750:
        top *= 1.5
    shift = logf(peak)

    def f(t):
        return math.exp(logf(t) - shift) * 0.5 * (1 + math.exp(-2 * order * t))

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, 0, top, points=[peak] if 0 < peak < top else None,
                                      epsabs=0, epsrel=1e-13, limit=400)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"K_{order}({x}) quadrature did not converge: {exc}")
    if not val > 0 or err > 1e-9 * val:
        raise QuadratureError(f"K_{order}({x}) quadrature error {err:.3g} too large")
    return shift - x + math.log(val)


def log_bessel_k(order: float, x: float) -> float:
    """log K_order(x) for the modified Bessel function of the second kind.

    The cosine-integral representation is tried first (in two equivalent
    forms).  If that quadrature
    fails to converge or its error estimate is too large, a warning is
    issued and the exponential (cosh) representation is used instead.
    """
    order = abs(float(order))
    x = float(x)
    if not x > 0:
        raise ValueError("x must be positive")
    out = _log_k_cosine(order, x)
    if out is None:
        warnings.warn(f"cosine quadrature for K_{order}({x}) unreliable; using cosh form",
                      QuadratureWarning, stacklevel=2)
        out = _log_k_cosh(order, x)
    return out


def bessel_k(order: float, x: float) -> float:
    return math.exp(log_bessel_k(order, x))


def gig_log_density(h: float, a: float, b: float, x):
    """log g_{h,a,b}(x), density proportional to x^{h-1} exp(-(a x + b/x)/2)."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    x = np.asarray(x, dtype=float)
    log_norm = 0.5 * h * math.log(a / b) - math.log(2) - log_bessel_k(abs(h), math.sqrt(a * b))
    return log_norm + (h - 1) * np.log(x) - 0.5 * (a * x + b / x)


def gig_sample(h: float, a: float, b: float, rng, size=None):
    """Draw(s) from g_{h,a,b}.

    Uses scipy's ratio-of-uniforms generator with the mapping
    p=h, b=sqrt(ab), scale=sqrt(b/a).
    """
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    dist = stats.geninvgauss(h, math.sqrt(a * b), scale=math.sqrt(b / a))
    return dist.rvs(size=size, random_state=rng)


# ---------------------------------------------------------------------------
# config round trip


def stream_from_config(cfg: dict) -> EnvStream:
    """Build a stream from flat key/value settings (strings or numbers)."""
    kind = str(cfg.get("kind", "bern")).strip().lower()
    seed = cfg.get("seed")
    seed = None if seed in (None, "", "none") else int(seed)

    def num(key):
        if key not in cfg:
            raise ValueError(f"stream kind {kind!r} needs key {key!r}")
        return float(cfg[key])

    if kind in ("bern", "finite-support"):
        return bern_stream(BernSpec(num("eps_low"), num("delta_low"), num("high")), seed)
    if kind in ("gamma-gig", "gig", "gamma"):
        return GammaStream(GigSpec(num("h"), num("r"), num("s")), seed)
    if kind in ("markov", "custom-ergodic"):
        stay = float(cfg.get("stay", 0.9))
        return markov_bern_stream(BernSpec(num("eps_low"), num("delta_low"), num("high")),
                                  stay, seed)
    raise ValueError(f"unknown stream kind {kind!r}")
