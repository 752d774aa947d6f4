import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artcollector.dynamics import (CollectorState, Policy, ar_coefficients, ar_coefficients_y,
                                   dual_iterate, factor_matrices, iterate, step_matrices,
                                   step_matrix)
from artcollector.env import EnvPair, bern_stream, constant_stream, markov_bern_stream

from conftest import MAIN

unit = st.floats(0.0, 1.0)
rate = st.floats(0.05, 20.0)


def policies():
    return st.tuples(unit, unit).filter(lambda t: t[0] + t[1] > 0).map(lambda t: Policy(*t))


def test_policy_validation():
    with pytest.raises(ValueError):
        Policy(0.0, 0.0)
    with pytest.raises(ValueError):
        Policy(1.2, 0.5)
    assert Policy(0.2, 0.7).swapped() == Policy(0.7, 0.2)
    assert Policy(0.5, 0.5).interior and Policy(1.0, 0.3).on_boundary


def test_state_validation():
    with pytest.raises(ValueError):
        CollectorState(0.0, 0.0)
    with pytest.raises(ValueError):
        CollectorState(-1.0, 1.0)


def test_step_matrix_corner():
    M = step_matrix(Policy(1, 1), EnvPair(2, 3))
    assert np.array_equal(M, [[6, 3], [0, 0]])


def test_factorization_hand_case():
    sell, buy = factor_matrices(Policy(0.5, 0.5), EnvPair(1, 1))
    assert np.allclose(sell @ buy, [[0.75, 0.5], [0.25, 0.5]], atol=1e-15)


@given(policies(), rate, rate)
def test_determinant_and_factorization(p, e, d):
    M = step_matrix(p, EnvPair(e, d))
    assert np.linalg.det(M) == pytest.approx((1 - p.lam) * (1 - p.theta), abs=1e-14 * max(1, e * d))
    sell, buy = factor_matrices(p, EnvPair(e, d))
    assert np.allclose(sell @ buy, M, rtol=0, atol=1e-14 * max(1.0, e * d))


@given(policies(), rate, rate)
def test_entry_positivity(p, e, d):
    M = step_matrix(p, EnvPair(e, d))
    assert (M >= 0).all()
    positive = p.lam > 0 and 0 < p.theta < 1
    assert bool((M > 0).all()) == positive


def test_flowchart_semantics():
    p, e = Policy(0.3, 0.6), EnvPair(1.7, 0.4)
    x, y = 2.0, 5.0
    # buy first: invest lam X, receive art at rate eps
    x1, y1 = (1 - p.lam) * x, y + p.lam * e.epsilon * x
    # then sell theta of the collection at rate delta
    x2, y2 = x1 + p.theta * e.delta * y1, (1 - p.theta) * y1
    assert np.allclose(step_matrix(p, e) @ [x, y], [x2, y2], atol=1e-14)


def test_vectorized_matches_scalar(rng):
    p = Policy(0.4, 0.7)
    e, d = rng.uniform(0.1, 3, 50), rng.uniform(0.1, 3, 50)
    V = step_matrices(p, e, d)
    for k in range(50):
        assert np.array_equal(V[k], step_matrix(p, EnvPair(e[k], d[k])))


def test_iterate_matches_direct_product():
    p = Policy(0.265, 0.284)
    s = bern_stream(MAIN, seed=3)
    tr = iterate(p, s, CollectorState(1.0, 2.0), 10)
    v = np.array([1.0, 2.0])
    for k in range(10):
        v = step_matrix(p, EnvPair(tr.eps[k], tr.delta[k])) @ v
    assert np.allclose(tr.final_state(), v, rtol=1e-12)
    assert tr.log_x[-1] == pytest.approx(math.log(v[0]), abs=1e-12)


def test_renormalization_long_run():
    p = Policy(0.265, 0.284)
    tr = iterate(p, bern_stream(MAIN, seed=3), CollectorState(1.0, 1.0), 300, renorm_every=64)
    ref = iterate(p, bern_stream(MAIN, seed=3), CollectorState(1.0, 1.0), 300, renorm_every=10**9)
    assert np.allclose(tr.log_x, ref.log_x, atol=1e-10)
    assert np.allclose(tr.log_y, ref.log_y, atol=1e-10)


def test_lambda_zero_closed_form():
    p = Policy(0.0, 0.4)
    s = bern_stream(MAIN, seed=8)
    x0, y0 = 1.5, 2.0
    tr = iterate(p, s, CollectorState(x0, y0), 30)
    n = np.arange(31)
    assert np.allclose(np.exp(tr.log_y), (1 - p.theta) ** n * y0, rtol=1e-12)
    x = x0 + p.theta * y0 * np.r_[0, np.cumsum((1 - p.theta) ** n[:-1] * tr.delta)]
    assert np.allclose(np.exp(tr.log_x), x, rtol=1e-12)


def test_theta_zero_deterministic_cash():
    p = Policy(0.35, 0.0)
    tr = iterate(p, markov_bern_stream(MAIN, seed=2), CollectorState(3.0, 1.0), 40)
    assert np.allclose(np.exp(tr.log_x), 3.0 * 0.65 ** np.arange(41), rtol=1e-12)


def test_degenerate_start_becomes_positive():
    tr = iterate(Policy(0.3, 0.4), bern_stream(MAIN, seed=1), CollectorState(1.0, 0.0), 2)
    assert math.isinf(tr.log_y[0])
    assert np.isfinite(tr.log_x[1:]).all() and np.isfinite(tr.log_y[1:]).all()


def test_corner_policy_never_collapses():
    # rank one at (1,1) but the kernel has no non-negative direction
    tr = iterate(Policy(1.0, 1.0), constant_stream(0.5, 0.5), CollectorState(0.0, 1.0), 3)
    assert np.isfinite(tr.log_x[1:]).all() and np.isinf(tr.log_y[1:]).all()


def test_art_accounting_identity():
    p = Policy(0.4, 0.3)
    s = bern_stream(MAIN, seed=6)
    x0, y0 = 1.0, 0.5
    tr = iterate(p, s, CollectorState(x0, y0), 20)
    X, Y = np.exp(tr.log_x), np.exp(tr.log_y)
    for n in range(20):
        k = np.arange(n + 1)
        rhs = (1 - p.theta) ** (n + 1) * y0 + np.sum(
            p.lam * (1 - p.theta) ** (n + 1 - k) * tr.eps[: n + 1] * X[: n + 1])
        assert Y[n + 1] == pytest.approx(rhs, rel=1e-10)


def test_trajectory_csv_schema():
    tr = iterate(Policy(0.3, 0.3), bern_stream(MAIN, seed=1), CollectorState(1, 1), 3)
    buf = io.StringIO()
    tr.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# schema: artcollector-trajectory v1"
    assert lines[1] == "step,logX,logY,epsilon,delta"
    assert len(lines) == 2 + 4


@pytest.mark.parametrize("stream", [bern_stream(MAIN, seed=4), markov_bern_stream(MAIN, seed=4)])
def test_dual_identity(stream):
    p = Policy(0.265, 0.284)
    s0 = CollectorState(1.0, 0.7)
    n = 1000
    twin = stream.clone()
    stream.reset()
    dual = dual_iterate(p, stream, s0, n)
    prim = iterate(p, twin, s0, n + 1)
    # Xt_k = (1-lam) X_k and Yt_k = Y_{k+1} / (1-theta)
    assert np.allclose(dual.log_x, math.log(1 - p.lam) + prim.log_x[: n + 1], rtol=0, atol=1e-10 * n)
    assert np.allclose(dual.log_y, prim.log_y[1: n + 2] - math.log(1 - p.theta), rtol=0,
                       atol=1e-10 * n)


def test_dual_identity_relative_short():
    p = Policy(0.6, 0.2)
    s = bern_stream(MAIN, seed=10)
    dual = dual_iterate(p, s.clone(), CollectorState(2.0, 1.0), 50)
    prim = iterate(p, s.clone(), CollectorState(2.0, 1.0), 51)
    assert np.allclose(np.exp(dual.log_x), (1 - p.lam) * np.exp(prim.log_x[:51]), rtol=1e-10)
    assert np.allclose(np.exp(dual.log_y), np.exp(prim.log_y[1:]) / (1 - p.theta), rtol=1e-10)


def test_dual_lambda_zero_and_theta_one():
    s = bern_stream(MAIN, seed=1)
    dual = dual_iterate(Policy(0.0, 0.5), s.clone(), CollectorState(1.0, 1.0), 20)
    prim = iterate(Policy(0.0, 0.5), s.clone(), CollectorState(1.0, 1.0), 21)
    assert np.allclose(dual.log_x, prim.log_x[:21], atol=1e-12)
    with pytest.raises(ValueError):
        dual_iterate(Policy(0.5, 1.0), s, CollectorState(1.0, 1.0), 5)


def test_dual_growth_matches_primal():
    p = Policy(0.265, 0.284)
    n = 200_000
    s = bern_stream(MAIN, seed=77)
    d = dual_iterate(p, s.clone(), CollectorState(1, 1), n)
    pr = iterate(p, s.clone(), CollectorState(1, 1), n)
    assert abs(d.log_y[-1] / n - pr.log_x[-1] / n) < 1e-3


def test_ar_coefficients_lambda_one():
    pn, qn = ar_coefficients(Policy(1.0, 0.4), 2.0, 3.0)
    assert qn == 0 and pn == pytest.approx(0.4 * 2.0 + 0.6 * 3.0)


def test_ar_recursion_reproduces_x_path():
    p = Policy(0.265, 0.284)
    s = bern_stream(MAIN, seed=12)
    tr = iterate(p, s, CollectorState(1.0, 1.0), 500, renorm_every=10**9)
    X = np.exp(tr.log_x)
    # X_{n+1} = p_n X_n + q_n X_{n-1} with d_n = delta_n / delta_{n-1}
    g = tr.eps * tr.delta
    d = tr.delta[1:] / tr.delta[:-1]
    pn, qn = ar_coefficients(p, g[1:], d)
    pred = pn * X[1:-1] + qn * X[:-2]
    assert np.allclose(pred, X[2:], rtol=1e-9)


def test_ar_recursion_reproduces_y_path():
    p = Policy(0.5, 0.3)
    s = bern_stream(MAIN, seed=13)
    tr = iterate(p, s, CollectorState(1.0, 1.0), 500, renorm_every=10**9)
    Y = np.exp(tr.log_y)
    # Y_{n+1} = r_n Y_n + s_n Y_{n-1} with zeta_n = eps_n delta_{n-1}, e_n = eps_n / eps_{n-1}
    z = tr.eps[1:] * tr.delta[:-1]
    e = tr.eps[1:] / tr.eps[:-1]
    rn, sn = ar_coefficients_y(p, z, e)
    assert np.allclose(rn * Y[1:-1] + sn * Y[:-2], Y[2:], rtol=1e-9)
    with pytest.raises(ValueError):
        ar_coefficients_y(Policy(0.5, 1.0), 1.0, 1.0)


def test_fibonacci_transfer_matrices():
    p = Policy(0.4, 0.6)
    s = bern_stream(MAIN, seed=14)
    e, d = s.pairs(30)
    pn, qn = ar_coefficients(p, e[1:] * d[1:], d[1:] / d[:-1])
    x0, x1 = 1.0, 1.7
    v = np.array([x1, x0])
    xs = [x0, x1]
    for a, b in zip(pn, qn):
        v = np.array([[a, b], [1.0, 0.0]]) @ v
        xs.append(a * xs[-1] + b * xs[-2])
    assert v[0] == pytest.approx(xs[-1], rel=1e-12)


def test_dual_coefficients_match_in_law_on_diagonal():
    # symmetric BERN and lam = theta: (r_n, s_n) on the stream has the law of
    # (p_n, q_n) on the dual stream
    from artcollector.env import BernSpec, dual_stream
    s = bern_stream(BernSpec(0.4, 0.4, 1.8), seed=5)
    p = Policy(0.3, 0.3)
    e, d = s.pairs(200_001)
    r, _ = ar_coefficients_y(p, e[1:] * d[:-1], e[1:] / e[:-1])
    de, dd = dual_stream(bern_stream(BernSpec(0.4, 0.4, 1.8), seed=6)).pairs(200_001)
    q, _ = ar_coefficients(p, de[1:] * dd[1:], dd[1:] / dd[:-1])
    assert abs(r.mean() - q.mean()) < 4 * math.hypot(r.std(), q.std()) / math.sqrt(200_000)
