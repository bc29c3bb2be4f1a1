import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockmodel import numerics as nm
from fockmodel.charfn import char_fn
from fockmodel.errors import NotCNC
from fockmodel.fockspace import creation_matrix
from fockmodel.model import (defect_geometry, defect_row_isometry, model_charfn_is_pure_part,
                             model_from_theta, model_of_T)
from fockmodel.multianalytic import MultiAnalyticOp, direct_sum, to_matrix
from fockmodel.rowcontraction import compute_Hc

from _fixtures import coisometric_tuple, graded_nilpotent, random_op


def const(n, c):
    return MultiAnalyticOp(n, 1, 1, {(): np.array([[c]], dtype=complex)})


def test_defect_isometry_inner_is_vacuous():
    shift = MultiAnalyticOp(2, 1, 1, {(1,): np.eye(1)})
    iso = defect_row_isometry(shift, 4)
    assert iso.is_cuntz and all(c.size == 0 for c in iso.C)


def test_defect_isometry_zero_not_cuntz():
    iso = defect_row_isometry(const(1, 0.0), 4)
    assert not iso.is_cuntz
    # C is the shift on F^2_{<=3} (top degree of the exact domain sent to 0)
    assert np.abs(np.abs(iso.C[0]) - np.diag(np.ones(4), -1)).max() < 1e-14


def test_defect_isometry_constant_not_cuntz():
    geom = defect_geometry(const(1, 0.6), 4)
    assert np.abs(nm.dagger(geom.Y) @ geom.Y - 0.64 * np.eye(5)).max() < 1e-14
    iso = defect_row_isometry(const(1, 0.6), 4, geom=geom)
    assert not iso.is_cuntz and abs(iso.cuntz_residual - 0.8) < 1e-14
    assert iso.gram_residual < 1e-14


def test_model_of_half_is_half():
    for lam in (0.3, 0.5):
        m = model_of_T([np.array([[lam]])])
        assert m.model.H_bold.dim == 1
        assert abs(m.model.T[0][0, 0] - lam) < 1e-8
        assert m.moment_residual < 1e-8


def test_model_of_zero_structural():
    m = model_from_theta(const(1, 0.0), 4)
    t = m.T[0]
    assert nm.opnorm(t) <= 1 + 1e-12
    assert m.checks["cnc"] and m.checks["adjoint_invariance"] < 1e-12


def test_inner_model_is_compressed_shift():
    rng = np.random.default_rng(0)
    T, _, _ = graded_nilpotent(rng, 2, [1, 1])
    th = char_fn(T, 3)
    m = model_from_theta(th, 4)
    assert m.space.geom.rank == 0
    q = m.H_bold.basis
    a = to_matrix(th, 4)
    # H_bold = F^2 (-) Theta F^2 on the exact range, T_i^H = S_i^H compressed
    assert np.abs(nm.dagger(q) @ a[:, : m.space.geom.dom.dim]).max() < 1e-12
    for i in (1, 2):
        s = creation_matrix(m.space.geom.out, i)
        assert np.abs(nm.dagger(m.T[i - 1]) - nm.dagger(q) @ nm.dagger(s) @ q).max() < 1e-12


def test_model_of_T_rejects_coisometric():
    with pytest.raises(NotCNC):
        model_of_T(coisometric_tuple(np.random.default_rng(1), 2, 2))


def test_nilpotent_moments_margin_three():
    rng = np.random.default_rng(2)
    T, _, _ = graded_nilpotent(rng, 2, [1, 1])
    m = model_of_T(T)
    assert m.moment_residual < 1e-10 and m.margin == 3


def test_pure_part_examples():
    half = char_fn([np.array([[0.5]])], 30)
    res = model_charfn_is_pure_part(half, 32, deg=5)
    assert res.coincide and res.model_dim == 1
    swap = MultiAnalyticOp(2, 2, 2, {(): np.array([[0, 1], [1, 0]], dtype=complex)})
    res = model_charfn_is_pure_part(swap, 3)
    assert res.coincide and res.model_dim == 0
    T, _, _ = graded_nilpotent(np.random.default_rng(3), 2, [1, 1])
    mixed = direct_sum(char_fn(T, 2), MultiAnalyticOp(2, 1, 1, {(): np.array([[1j]])}))
    res = model_charfn_is_pure_part(mixed, 3)
    assert res.status == "coincide" and res.residual < 1e-8


def test_hypothesis_not_met_reported():
    res = model_charfn_is_pure_part(const(1, 0.5), 3)
    assert res.status == "hypothesis not met" and res.coincide is None


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_graph_isometry_and_dilation(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    th = random_op(rng, n, int(rng.integers(1, 3)), int(rng.integers(1, 3)), int(rng.integers(0, 2)),
                   norm=0.9)
    N_w = 3
    geom = defect_geometry(th, N_w)
    f = rng.standard_normal(geom.dom.dim) + 1j * rng.standard_normal(geom.dom.dim)
    lhs = np.linalg.norm(geom.A_t @ f) ** 2 + np.linalg.norm(geom.Y @ f) ** 2
    assert abs(lhs - np.linalg.norm(f) ** 2) < 1e-10 * np.linalg.norm(f) ** 2


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_model_dilation_exact_regime(seed):
    rng = np.random.default_rng(seed)
    grades = [1] + [int(g) for g in rng.integers(1, 3, size=int(rng.integers(1, 3)))]
    T, _, _ = graded_nilpotent(rng, 2, grades)
    m = model_from_theta(char_fn(T, len(grades)), len(grades) + 1)
    assert m.checks["adjoint_invariance"] < 1e-8
    q = m.H_bold.basis
    for v, t in zip(m.V, m.T):
        assert np.abs(nm.dagger(v) @ q - q @ nm.dagger(t)).max() < 1e-8
    assert m.H_bold.dim == sum(grades)
    assert compute_Hc(m.T).dim == 0
