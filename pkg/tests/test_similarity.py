import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockmodel.errors import NotCNC, NotPowerBounded
from fockmodel.multianalytic import MultiAnalyticOp
from fockmodel.similarity import (ORIENTATION, asymptotic_P_power_bounded, injectivity_check,
                                  invertible_charfn_criterion, lower_bound_check,
                                  similarity_to_cuntz, weighted_shift_charfn)

from _fixtures import coisometric_tuple, haar_unitary, random_row_contraction

X0 = np.array([[1.0, 1.0], [0.0, 1.0]])
ROT = X0 @ np.diag([1j, -1j]) @ np.linalg.inv(X0)


def test_injectivity_examples():
    assert injectivity_check([np.array([[0.5]])])
    assert not injectivity_check([np.array([[0.0]])])
    rng = np.random.default_rng(0)
    assert not injectivity_check([haar_unitary(rng, 3), haar_unitary(rng, 3)])


def test_lower_bound_examples():
    assert abs(lower_bound_check([np.array([[np.exp(0.4j)]])]) - 1) < 1e-14
    assert lower_bound_check([np.array([[0.5]])]) < 1e-50
    c = lower_bound_check([ROT])
    assert c > 0.1
    # oracle: Phi^k(I) alternates between I and R R^H; the minimum eigenvalue is of R R^H
    assert abs(c - np.linalg.eigvalsh(ROT @ ROT.conj().T)[0]) < 1e-12


def test_asymptotic_P_examples():
    ap = asymptotic_P_power_bounded([ROT])
    assert np.abs(ap.P - [[3, 1], [1, 1]]).max() < 1e-10
    assert ap.fixed_point_residual < 1e-12
    u = haar_unitary(np.random.default_rng(1), 2)
    assert np.abs(asymptotic_P_power_bounded([u]).P - np.eye(2)).max() < 1e-10
    with pytest.raises(NotPowerBounded):
        asymptotic_P_power_bounded([2 * np.eye(1)])


def test_similarity_rotation():
    rep = similarity_to_cuntz([ROT])
    assert rep.similar and rep.orientation == ORIENTATION
    w = rep.W[0]
    assert np.abs(w @ w.conj().T - np.eye(2)).max() < 1e-10
    assert np.abs(ROT @ rep.X - rep.X @ w).max() < 1e-10
    cond0 = np.linalg.cond(X0)
    assert rep.cond_X <= cond0 * (1 + 1e-8)
    assert rep.c >= 1 / rep.cond_X ** 2 - 1e-10


def test_similarity_negative_examples():
    rng = np.random.default_rng(2)
    rep = similarity_to_cuntz(random_row_contraction(rng, 2, 3))
    assert rep.similar is False and rep.reason.startswith("injectivity")
    rep = similarity_to_cuntz([np.array([[0.5]])])
    assert rep.similar is False and rep.reason.startswith("lower bound")
    rep = similarity_to_cuntz([3 * np.eye(2)])
    assert rep.similar is False and "power bounded" in rep.reason


def test_invertibility_examples():
    for lam in (0.5, 0.9):
        v = invertible_charfn_criterion([np.array([[lam]])])
        assert v.invertible is False
    one = MultiAnalyticOp.constant(1, haar_unitary(np.random.default_rng(3), 2))
    v = invertible_charfn_criterion(theta=one)
    assert v.invertible and all(abs(s - 1) < 1e-12 for s in v.sigma_min)
    with pytest.raises(NotCNC):
        invertible_charfn_criterion(coisometric_tuple(np.random.default_rng(4), 2, 1))


def test_weighted_shift_single_weight():
    theta, cond = weighted_shift_charfn({0: 0.9})
    v = invertible_charfn_criterion(theta=theta)
    assert v.invertible
    assert abs(v.sigma_min[-1] - 0.9) < 1e-10
    assert abs(v.theta_inv_norm - 1 / 0.9) < 1e-10
    assert cond >= v.theta_inv_norm - 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_P_fixed_point_and_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    x = np.eye(d) + 0.3 * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    u = haar_unitary(rng, d)
    T = [x @ u @ np.linalg.inv(x)]
    rep = similarity_to_cuntz(T)
    if rep.P is not None:
        t = T[0]
        assert np.abs(t @ rep.P @ t.conj().T - rep.P).max() <= 1e-8
    v = haar_unitary(rng, d)
    moved = similarity_to_cuntz([v @ T[0] @ v.conj().T])
    assert moved.similar == rep.similar
