import math

import numpy as np
import pytest

from cstrain.errors import AllFailed, InfeasibleKnobs, NotEnoughEasy, ZeroColumn
from cstrain.l1 import SolveStatus
from cstrain.linalg import match_up_to_signed_scaled_permutation, rip_constant, support_size
from cstrain.pipeline import (normalized_product, sparse_recovery, suggest_parameters, train,
                              train_and_recover)
from cstrain.rand_models import (ModelSpec, RngStream, gen_component_matrix, gen_gaussian_sensing,
                                 gen_sparse_combinator, gen_training_matrix)

RIP_THRESHOLD = 4 / math.sqrt(41)

# small instance family where training and recovery succeed reliably
N, P, S, M, Q = 80, 4, 24, 70, 8


def _instance(seed, k=2):
    A = gen_gaussian_sensing(M, N, RngStream(40, seed))
    X = gen_component_matrix(N, P, ModelSpec(S / N), RngStream(41, seed))
    Z = gen_training_matrix(P, Q, 1, RngStream(42, seed))
    z = gen_sparse_combinator(P, k, RngStream(43, seed))
    return A, X, Z, z


def _rip_instance(seed, n=30, p=6, m=20, t=4):
    """Search forward from ``seed`` for an instance whose normalized product is (t, eps)-RIP."""
    while True:
        A = gen_gaussian_sensing(m, n, RngStream(50, seed))
        X = gen_component_matrix(n, p, ModelSpec(0.3), RngStream(51, seed))
        if np.all(np.linalg.norm(X, axis=0) > 0):
            if rip_constant(normalized_product(A, X)[0], t).epsilon < RIP_THRESHOLD:
                return seed, A, X
        seed += 1000


# sparse_recovery

def test_recovery_identity_components():
    found = 0
    for seed in range(200):
        A = gen_gaussian_sensing(10, 14, RngStream(52, seed))
        if rip_constant(A * (math.sqrt(14) / np.linalg.norm(A)), 2).epsilon >= RIP_THRESHOLD:
            continue
        x0 = np.zeros(14)
        x0[seed % 14] = 1.5
        res = sparse_recovery(A, A @ x0, np.eye(14))
        np.testing.assert_allclose(res.x, x0, atol=1e-6)
        found += 1
    assert found >= 5


def test_recovery_reproduces_x_and_ignores_scaled_permutation():
    seed = 0
    for _ in range(10):
        seed, A, X = _rip_instance(seed)
        gen = RngStream(53, seed).generator()
        z = gen_sparse_combinator(X.shape[1], 2, gen)
        x, b = X @ z, A @ (X @ z)
        base = sparse_recovery(A, b, X)
        assert np.linalg.norm(base.x - x) <= 1e-6 * np.linalg.norm(x)
        assert base.solver_status is SolveStatus.OPTIMAL
        for _ in range(3):
            perm = gen.permutation(X.shape[1])
            gamma = gen.choice([-1.0, 1.0], X.shape[1]) * gen.uniform(0.1, 10, X.shape[1])
            other = sparse_recovery(A, b, X[:, perm] * gamma)
            np.testing.assert_allclose(other.x, base.x, atol=1e-9 * np.linalg.norm(x))
        seed += 1


def test_recovery_zero_rhs_and_zero_column():
    A, X, _, _ = _instance(0)
    res = sparse_recovery(A, np.zeros(M), X)
    assert np.all(res.x == 0) and res.support == 0
    X[:, 1] = 0
    with pytest.raises(ZeroColumn):
        sparse_recovery(A, np.zeros(M), X)


# train

def test_train_matches_components():
    matched = 0
    for seed in range(20):
        A, X, Z, _ = _instance(seed)
        res = train(A, A @ X @ Z, 2 * S, RngStream(44, seed), p=P)
        matched += match_up_to_signed_scaled_permutation(X, res.factorization.X_bar).matched
        assert sorted(res.kept_columns + res.discarded) == list(range(Q))
    assert matched >= 16


def test_train_discards_dense_column():
    A, X, Z, _ = _instance(1)
    B = A @ X @ Z
    B[:, 5] = A @ RngStream(45).generator().standard_normal(N)  # off the sparse model
    res = train(A, B, 2 * S, RngStream(44, 1), p=P)
    assert 5 in res.discarded and 5 not in res.kept_columns


def test_train_filter_soundness():
    A, X, Z, _ = _instance(2)
    B = A @ X @ Z
    res = train(A, B, 2 * S, RngStream(44, 2), p=P)
    Y = res.factorization.X_bar @ res.factorization.Z_bar
    for i, col in enumerate(res.kept_columns):
        assert np.linalg.norm(A @ Y[:, i] - B[:, col]) <= 1e-8 * max(np.linalg.norm(B[:, col]), 1)
        assert support_size(Y[:, i]) <= 2 * S


def test_train_u_zero():
    A, X, Z, _ = _instance(3)
    with pytest.raises(NotEnoughEasy):
        train(A, A @ X @ Z, 0, RngStream(44, 3), p=P)


# train_and_recover

def test_singleton_sweep_equals_train_then_recover():
    A, X, Z, z = _instance(4)
    B, b = A @ X @ Z, A @ X @ z
    res = train_and_recover(A, b, B, [2 * S], RngStream(44, 4), p=P)
    tr = train(A, B, 2 * S, RngStream(44, 4), p=P)
    direct = sparse_recovery(A, b, tr.factorization.X_bar)
    np.testing.assert_array_equal(res.x, direct.x)
    assert res.u_used == 2 * S


def test_sweep_recovers_true_support():
    exact = 0
    for seed in range(20):
        A, X, Z, z = _instance(seed)
        x = X @ z
        res = train_and_recover(A, A @ x, A @ X @ Z, [S, 2 * S, 3 * S], RngStream(44, seed), p=P)
        exact += res.support == support_size(x) and np.linalg.norm(res.x - x) <= 1e-6 * np.linalg.norm(x)
        # returned support is minimal over the successful u
        for u, outcome in res.attempts.items():
            if outcome == "ok":
                other = train_and_recover(A, A @ x, A @ X @ Z, [u], RngStream(44, seed), p=P)
                assert res.support <= other.support
    assert exact >= 16


def test_sweep_all_failed_and_validation():
    A, X, Z, z = _instance(5)
    B, b = A @ X @ Z, A @ X @ z
    with pytest.raises(AllFailed):
        train_and_recover(A, b, B, [1, 2, 3], RngStream(44, 5), p=P)
    with pytest.raises(ValueError):
        train_and_recover(A, b, B, [], RngStream(44, 5))
    with pytest.raises(ValueError):
        train_and_recover(A, b, B, [0, 5], RngStream(44, 5))


# suggest_parameters

def test_suggest_headline_sizes():
    d = suggest_parameters(8, 2)
    assert (d.n, d.s, d.q, d.u) == (277, 70, 16, 140)
    assert d.theta == pytest.approx(0.2527, abs=1e-4)
    assert d.m == math.ceil(2 * math.sqrt(277) * math.log(277))
    assert 2 / d.p <= d.theta <= 1 / math.sqrt(d.p)
    assert d.s * d.t_bar <= d.m / 2 or d.t_bar == 1


def test_suggest_infeasible():
    with pytest.raises(InfeasibleKnobs):
        suggest_parameters(2, 1)
    with pytest.raises(ValueError):
        suggest_parameters(1, 1)


def test_suggest_monotone_in_p():
    ns = []
    for p in range(4, 20):
        try:
            ns.append(suggest_parameters(p, 2).n)
        except InfeasibleKnobs:
            pass
    assert ns == sorted(ns) and len(ns) > 10
