import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from mvlogit.exceptions import ConfigurationError, ValidationError
from mvlogit.outcomes import (TrialDataset, build_outcome_matrix, decode_category,
                              encode_response, inverse_mlogit, linear_predictors,
                              log_likelihood)


def test_outcome_matrix_two_outcomes():
    H = build_outcome_matrix(2)
    assert H.rows.tolist() == [[1, 1], [1, 0], [0, 1], [0, 0]]
    assert H.labels() == ["11", "10", "01", "00"]


def test_outcome_matrix_one_outcome():
    assert build_outcome_matrix(1).rows.tolist() == [[1], [0]]


def test_outcome_matrix_three_outcomes_sixth_row():
    H = build_outcome_matrix(3)
    # sixth row (index 5) is the binary expansion of Q - 6 = 2
    assert H.rows[5].tolist() == [0, 1, 0]
    brute = [list(map(int, format(8 - q, "03b"))) for q in range(1, 9)]
    assert H.rows.tolist() == brute
    assert len({tuple(r) for r in H.rows}) == 8


@pytest.mark.parametrize("K", [0, 11, -1, 2.5])
def test_outcome_matrix_rejects_out_of_range(K):
    with pytest.raises(ConfigurationError):
        build_outcome_matrix(K)


def test_outcome_matrix_is_read_only():
    H = build_outcome_matrix(2)
    with pytest.raises(ValueError):
        H.rows[0, 0] = 0


def test_encode_examples():
    H = build_outcome_matrix(2)
    assert encode_response([1, 1], H) == 0
    assert encode_response([0, 0], H) == 3


@pytest.mark.parametrize("K", range(1, 7))
def test_encode_decode_exhaustive(K):
    H = build_outcome_matrix(K)
    ys = np.array(list(itertools.product([0, 1], repeat=K)))
    q = encode_response(ys, H)
    assert sorted(q.tolist()) == list(range(H.Q))
    np.testing.assert_array_equal(decode_category(q, H), ys)
    for qq in range(H.Q):
        assert encode_response(decode_category(qq, H), H) == qq


@pytest.mark.parametrize("y", [[1, 2], [1], [1, 0, 1], [0.5, 1]])
def test_encode_rejects_malformed(y):
    with pytest.raises(ValidationError):
        encode_response(y, build_outcome_matrix(2))


def test_linear_predictors_examples():
    assert np.all(linear_predictors(np.zeros((3, 2)), [0.7]) == 0)
    beta = np.array([[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]])
    assert linear_predictors(beta, [0.5])[0] == 2.0
    with pytest.raises(ValidationError):
        linear_predictors(beta, [0.5, 1.0])


def test_linear_predictors_interaction_model():
    beta = np.array([[0.1, 0.2, 0.3, 0.4]])
    T, bp = 1.0, -0.5
    psi = linear_predictors(beta, [T, bp, bp * T])
    assert psi[0] == pytest.approx(0.1 + 0.2 * T + 0.3 * bp + 0.4 * bp * T)


def test_inverse_mlogit_examples():
    np.testing.assert_allclose(inverse_mlogit([0.0, 0.0, 0.0]), [0.25] * 4)
    np.testing.assert_allclose(inverse_mlogit([math.log(2), 0, 0]), [0.4, 0.2, 0.2, 0.2])
    phi = inverse_mlogit([700.0, 0.0, 0.0])
    assert np.all(np.isfinite(phi))
    assert phi[0] == pytest.approx(1.0)
    assert phi[3] == pytest.approx(math.exp(-700.0), rel=1e-10)


def test_inverse_mlogit_rejects_non_finite():
    with pytest.raises(ValidationError):
        inverse_mlogit([np.inf, 0.0, 0.0])


@given(hnp.arrays(float, st.integers(1, 15), elements=st.floats(-700, 700)))
def test_inverse_mlogit_simplex(psi):
    phi = inverse_mlogit(psi)
    assert abs(phi.sum() - 1.0) < 1e-12
    assert np.all((phi >= 0) & (phi <= 1))


@given(hnp.arrays(float, 3, elements=st.floats(-30, 30)))
def test_inverse_mlogit_matches_pinned_softmax(psi):
    full = np.append(psi, 0.0)
    soft = np.exp(full - full.max())
    soft /= soft.sum()
    np.testing.assert_allclose(inverse_mlogit(psi), soft, rtol=1e-12, atol=1e-300)
    # shifting only the free predictors changes phi: the reference is pinned
    assert inverse_mlogit(psi + 1.0)[-1] < inverse_mlogit(psi)[-1]


def test_log_likelihood_uniform():
    rng = np.random.default_rng(0)
    Y = rng.integers(0, 2, size=(10, 2))
    X = rng.normal(size=(10, 1))
    assert log_likelihood(np.zeros((3, 2)), X, Y) == pytest.approx(-10 * math.log(4))


def test_log_likelihood_single_subject():
    beta = np.array([[math.log(2)], [0.0], [0.0]])
    assert log_likelihood(beta, np.zeros((1, 0)), [[1, 1]]) == pytest.approx(math.log(0.4))


def test_log_likelihood_brute_force_and_permutation():
    rng = np.random.default_rng(1)
    H = build_outcome_matrix(2)
    beta = rng.normal(size=(3, 3))
    X = rng.normal(size=(7, 2))
    Y = rng.integers(0, 2, size=(7, 2))
    prod = 1.0
    for x, y in zip(X, Y):
        psi = beta[:, 0] + beta[:, 1:] @ x
        e = np.append(np.exp(psi), 1.0)
        prod *= e[encode_response(y, H)] / e.sum()
    ll = log_likelihood(beta, X, Y)
    assert ll == pytest.approx(math.log(prod), abs=1e-12)
    assert ll <= 0
    perm = rng.permutation(7)
    assert log_likelihood(beta, X[perm], Y[perm]) == pytest.approx(ll, abs=1e-12)


def test_trial_dataset_validation():
    d = TrialDataset([[1, 0], [0, 1]], [0, 1], [[0.3], [0.1]])
    assert d.n == 2 and d.K == 2
    assert d.arm_counts() == {0: 1, 1: 1}
    with pytest.raises(ValidationError):
        TrialDataset([[1, 2]], [0], [[0.0]])
    with pytest.raises(ValidationError):
        TrialDataset([[1, 0]], [2], [[0.0]])
    with pytest.raises(ValidationError):
        TrialDataset([[1, 0]], [1], [[np.nan]])
    sub = d.subset([True, False])
    assert sub.n == 1
