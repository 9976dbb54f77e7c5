import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robust_dcsbm.model import ModelParams, generate
from robust_dcsbm.quantities import (aggregates, choose_tuning, default_delta, degrees,
                                     estimate_H_plus, lambda_window, penalty_vector,
                                     theorem_feasibility)

from conftest import complete, path_graph


def toy():
    return ModelParams(n=4, m=0, cluster_sizes=(2, 2), B=[[0.6, 0.2], [0.2, 0.6]], pareto_shape=None)


def test_degrees_examples():
    assert degrees(path_graph()).tolist() == [1, 2, 1]
    assert degrees(np.zeros((4, 4))).tolist() == [0, 0, 0, 0]
    assert degrees(complete(5)).tolist() == [4] * 5


def test_degree_invariants():
    A = generate(ModelParams.planted(n=50, m=5, r=2, p=0.4, q=0.1, seed=2)).A
    d = degrees(A)
    assert d.sum() % 2 == 0
    assert d.min() >= 0 and d.max() <= A.shape[0] - 1


def test_aggregates_toy():
    agg = aggregates(toy(), np.ones(4))
    assert agg.G.tolist() == [2, 2]
    assert np.allclose(agg.H, [1.6, 1.6])
    assert agg.H_plus == pytest.approx(1.6) and agg.H_minus == pytest.approx(1.6)
    assert np.allclose(agg.f, 1.6)


def test_aggregates_single_cluster():
    th = np.array([0.5, 1.0, 2.0])
    p = ModelParams(n=3, m=0, cluster_sizes=(3,), B=[[0.3]])
    assert aggregates(p, th).H[0] == pytest.approx(0.3 * 3.5)


@given(r=st.integers(1, 5), l=st.integers(1, 40), p=st.floats(0.05, 1), q=st.floats(0, 1))
def test_equal_sizes_H(r, l, p, q):
    q = min(q, p)
    par = ModelParams.planted(n=r * l, m=0, r=r, p=p, q=q, pareto_shape=None)
    agg = aggregates(par, np.ones(r * l))
    assert np.allclose(agg.H, l * (p + (r - 1) * q))


def test_aggregate_invariants():
    par = ModelParams.planted(n=300, m=0, r=3, p=0.4, q=0.1, seed=1)
    th = generate(par).theta
    agg = aggregates(par, th)
    n = par.n
    assert np.all(agg.H >= n * agg.theta_bar * agg.q_minus - 1e-9)
    assert np.all(agg.H <= n * agg.theta_bar * agg.p_plus + 1e-9)
    assert agg.G_min >= agg.l_min * agg.theta_min


def test_penalty_vector_examples():
    assert penalty_vector(np.array([3]), 5)[0] == 5
    assert penalty_vector(np.array([7]), 5)[0] == 7
    with pytest.raises(ValueError):
        penalty_vector(np.array([1, 2]), 0.0)


@given(d=st.lists(st.integers(0, 50), min_size=1, max_size=20), h=st.floats(0.1, 60),
       dh=st.floats(0, 10), dd=st.integers(0, 5))
def test_penalty_vector_properties(d, h, dh, dd):
    d = np.array(d)
    ds = penalty_vector(d, h)
    assert np.all(ds >= d) and np.all(ds >= h)
    assert np.array_equal(penalty_vector(ds, h), ds)
    assert np.all(penalty_vector(d, h + dh) >= ds)
    assert np.all(penalty_vector(d + dd, h) >= ds)


def test_estimate_H_plus_examples():
    A = np.zeros((6, 6), dtype=int)
    for i in range(6):  # 6-cycle, 2-regular
        A[i, (i + 1) % 6] = A[(i + 1) % 6, i] = 1
    assert estimate_H_plus(A) == 2
    assert estimate_H_plus(np.array([1, 2, 3, 100]), trim=1) == 2


def test_estimate_H_plus_tracks_oracle():
    for seed in range(20):
        par = ModelParams.planted(n=400, m=10, r=2, p=0.2, q=0.2 / 3, pareto_shape=2.5,
                                  tau=1.0, seed=seed)
        inst = generate(par)
        oracle = aggregates(par, inst.theta).H_plus
        est = estimate_H_plus(inst.A, trim=par.m)
        assert abs(est - oracle) / oracle < 0.15


def test_toy_feasibility_and_window():
    rep = theorem_feasibility(toy(), np.ones(4), 0.1, c0=1.0)
    assert not rep.feasible
    assert rep.delta_terms[0] == pytest.approx(math.sqrt(0.6 * math.log(4) / 2))
    assert rep.delta_terms[0] > 0.1
    assert rep.lambda_lo == pytest.approx(0.1171875)
    assert rep.lambda_hi == pytest.approx(0.1953125)


def test_zero_outliers():
    rep = theorem_feasibility(toy(), np.ones(4), 0.1)
    assert rep.alpha_min == 0.0
    assert rep.delta_terms[4] == 0.0 and rep.delta_terms[5] == 0.0


def test_delta_must_be_positive():
    with pytest.raises(ValueError):
        theorem_feasibility(toy(), np.ones(4), 0.0)


def test_feasible_implies_open_window():
    par = ModelParams.planted(n=2000, m=0, r=2, p=0.9, q=0.05, pareto_shape=None)
    rep = theorem_feasibility(par, np.ones(2000), 0.4, c0=0.1)
    assert rep.feasible and rep.lambda_lo < rep.lambda_hi


@given(p=st.floats(0.2, 0.95), ratio=st.floats(1.5, 10), l=st.integers(5, 300),
       m=st.integers(0, 30), r=st.integers(2, 5), c1=st.floats(0.1, 10))
def test_sbm_specialization(p, ratio, l, m, r, c1):
    """With unit theta the conditions collapse onto the expected-degree form."""
    q = p / ratio
    n = r * l
    par = ModelParams.planted(n=n, m=m, r=r, p=p, q=q, pareto_shape=None)
    delta = (p - q) / 4
    rep = theorem_feasibility(par, np.ones(n), delta, c1=c1)
    f = q * n + (p - q) * l
    assert rep.lambda_lo == pytest.approx((q + delta) / f**2, rel=1e-12)
    assert rep.lambda_hi == pytest.approx((p - delta) / f**2, rel=1e-12)
    assert rep.alpha_min == pytest.approx(c1 * m / f, rel=1e-12, abs=0)
    t = rep.delta_terms
    alpha = rep.alpha
    assert t[0] == pytest.approx(math.sqrt(p * math.log(n) / l))
    assert t[1] == pytest.approx(alpha * n * p / l)
    assert t[4] == pytest.approx(m * math.sqrt(r) / l)
    assert t[5] == pytest.approx(m / (alpha * l) if m else 0.0)


@given(d1=st.floats(0.01, 0.5), d2=st.floats(0.01, 0.5))
def test_delta_condition_monotone(d1, d2):
    par = ModelParams.planted(n=100, m=3, r=2, p=0.6, q=0.1, seed=4)
    th = generate(par).theta
    lo, hi = sorted((d1, d2))
    a = theorem_feasibility(par, th, lo, c0=0.05, alpha=0.1)
    b = theorem_feasibility(par, th, hi, c0=0.05, alpha=0.1)
    assert (not a.delta_ok) or b.delta_ok


def test_choose_tuning_examples():
    rep = theorem_feasibility(toy(), np.ones(4), 0.1)
    lam, alpha = choose_tuning(rep, "midpoint")
    assert lam == pytest.approx(math.sqrt(0.1171875 * 0.1953125))
    assert lam == pytest.approx(0.1512884, abs=1e-7)
    assert alpha == 0.0
    lam, alpha = choose_tuning(None, "heuristic", A=complete(5), m_hat=2, c1=4)
    assert lam == pytest.approx(1 / 20)
    assert alpha == pytest.approx(4 * 2 / 4)
    assert choose_tuning(None, "heuristic", A=complete(5), m_hat=0)[1] == 0.0


def test_midpoint_rejects_empty_window():
    rep = theorem_feasibility(toy(), np.ones(4), 0.3)
    assert not rep.window_ok
    with pytest.raises(ValueError):
        choose_tuning(rep, "midpoint")
    lam, _ = choose_tuning(rep, "auto", A=complete(4), m_hat=0)
    assert lam == pytest.approx(1 / 12)


def test_default_delta_opens_window():
    par = ModelParams.planted(n=400, m=10, r=2, p=0.2, q=0.2 / 3, seed=0)
    th = generate(par).theta
    lo, hi = lambda_window(par, aggregates(par, th), default_delta(par))
    assert lo < hi


def test_report_to_dict_is_json_safe():
    import json
    par = ModelParams.planted(n=20, m=0, r=1, p=0.5, q=0.5, pareto_shape=None)
    rep = theorem_feasibility(par, np.ones(20), 0.1)
    json.dumps(rep.to_dict())
