"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import json
import time

import numpy as np
import pytest
from scipy.linalg import block_diag

from fockmodel import numerics as nm
from fockmodel.charfn import char_fn, defects
from fockmodel.cli import dump_operator, dump_tuple, main
from fockmodel.errors import StructureViolation
from fockmodel.factorization import (build_X, c0_c1_from_inner_outer, regularity_shortcuts,
                                     subspace_round_trip)
from fockmodel.model import model_of_T
from fockmodel.multianalytic import MultiAnalyticOp, classify, intertwining_defect, multiply
from fockmodel.rowcontraction import (classify_tuple, invariance_residual, phi_iterate,
                                      triangulate_c0_c1)
from fockmodel.similarity import (asymptotic_P_power_bounded, invertible_charfn_criterion,
                                  similarity_to_cuntz, weighted_shift_charfn)

from _fixtures import (coisometric_tuple, graded_invariant_subspace, graded_nilpotent, haar_unitary,
                       isometric_constant, random_inner, random_op, random_row_contraction)

CREATED = []


@pytest.fixture(scope="module", autouse=True)
def record_operators():
    """Keep every MultiAnalyticOp built while this module runs."""
    orig = MultiAnalyticOp.__init__

    def init(self, *args, **kwargs):
        orig(self, *args, **kwargs)
        CREATED.append(self)

    MultiAnalyticOp.__init__ = init
    yield
    MultiAnalyticOp.__init__ = orig


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def mixed_tuple(rng, n, d_pure, d_co, norm):
    p = random_row_contraction(rng, n, d_pure, norm=norm)
    c = coisometric_tuple(rng, n, d_co)
    u = haar_unitary(rng, d_pure + d_co)
    return [u @ block_diag(a, b) @ u.conj().T for a, b in zip(p, c)]


def test_criterion_01_scalar_charfn(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for lam in (0.3, 0.5, 0.9):
        th = char_fn([np.array([[lam]])], 10)
        phase = th.coeff(())[0, 0] / -lam
        worst = max(worst, abs(abs(phase) - 1))
        for k in range(11):
            expect = -lam if k == 0 else (1 - lam ** 2) * lam ** (k - 1)
            worst = max(worst, abs(th.coeff((1,) * k)[0, 0] / phase - expect))
    dt = time.perf_counter() - t0
    report(capsys, 1, worst <= 1e-12 and dt < 1, f"max coefficient error {worst:.2e}, {dt:.3f} s")


def test_criterion_02_inner_iff_pure(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2002)
    agree, pure_count = 0, 0
    for k in range(50):
        d = int(rng.integers(1, 4))
        norm = float(rng.uniform(0.05, 0.12))
        if k % 2 == 0:
            T = random_row_contraction(rng, 2, d, norm=norm)
        else:
            T = mixed_tuple(rng, 2, max(d - 1, 1), 1, norm)
        cls = classify_tuple(T)
        inner = classify(char_fn(T, 9)).inner
        agree += inner == cls.pure_C0
        pure_count += bool(cls.pure_C0)
    half = [np.array([[0.5]]), np.array([[0.5]])]
    N = 12
    dd = defects(half)
    gap = np.eye(dd.D.dim) - char_fn(half, N).symbol_gram()
    expect = 2.0 ** -N * nm.dagger(dd.D.basis) @ dd.delta_T @ dd.delta_T @ dd.D.basis
    tail = float(np.abs(gap - expect).max())
    dt = time.perf_counter() - t0
    ok = agree == 50 and tail <= 2.0 ** -N * 1e-6 and dt < 30
    report(capsys, 2, ok, f"{agree}/50 agree ({pure_count} pure), tail error {tail:.2e}, {dt:.1f} s")


def test_criterion_03_X_isometry(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2003)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 3))
        a, b, c = (int(x) for x in rng.integers(1, 4, size=3))
        d1, d2 = (int(x) for x in rng.integers(0, 4, size=2))
        th1 = random_op(rng, n, a, b, d1, norm=float(rng.uniform(0.2, 1.0)))
        th2 = random_op(rng, n, b, c, d2, norm=float(rng.uniform(0.2, 1.0)))
        worst = max(worst, build_X(th1, th2, check_stability=False).isometry_residual)
    dt = time.perf_counter() - t0
    report(capsys, 3, worst <= 1e-10 and dt < 60, f"max isometry residual {worst:.2e}, {dt:.1f} s")


def _shortcut_pair(rng, kind):
    n = int(rng.integers(1, 3))
    if kind == "inner-inner":
        a = int(rng.integers(1, 3))
        b = a + int(rng.integers(0, 2))
        c = b + int(rng.integers(0, 2))
        return random_inner(rng, n, a, b, int(rng.integers(0, 2))), \
            random_inner(rng, n, b, c, int(rng.integers(0, 2)))
    if kind == "inner-left":
        b = int(rng.integers(1, 3))
        return random_op(rng, n, int(rng.integers(1, 3)), b, 1, norm=0.8), \
            random_inner(rng, n, b, b + int(rng.integers(0, 2)), 1)
    # inner product whose left factor is not inner: V^H kills the complement of range V
    a = int(rng.integers(1, 3))
    v = isometric_constant(rng, n, a, a + 1)
    vh = MultiAnalyticOp.constant(n, v.coeff(()).conj().T)
    th1 = multiply(v, random_inner(rng, n, a, a, 1))
    th2 = multiply(random_inner(rng, n, a, a, 1), vh)
    return th1, th2


def test_criterion_04_shortcuts(capsys):
    rng = np.random.default_rng(2004)
    kinds = ["inner-inner"] * 40 + ["inner-left"] * 30 + ["inner-product"] * 30
    violations, applied = 0, {"inner_factor2": 0, "inner_theta": 0, "rank_rule": 0}
    for kind in kinds:
        th1, th2 = _shortcut_pair(rng, kind)
        try:
            out = regularity_shortcuts(build_X(th1, th2))
        except StructureViolation:
            violations += 1
            continue
        for name in out["applied"]:
            applied[name] += 1
    ok = violations == 0 and all(applied.values())
    report(capsys, 4, ok, f"{violations} violations over 100 pairs, clauses applied {applied}")


def _nilpotent_grades(rng, d_max=4, levels=3):
    while True:
        g = [int(x) for x in rng.integers(1, 3, size=int(rng.integers(2, levels + 1)))]
        if sum(g) <= d_max:
            return g


def test_criterion_05_model_moments(capsys):
    rng = np.random.default_rng(2005)
    worst, slowest = 0.0, 0.0
    for _ in range(8):
        grades = _nilpotent_grades(rng)
        T, _, _ = graded_nilpotent(rng, 2, grades)
        assert np.abs(phi_iterate(T, 3)).max() < 1e-14
        t0 = time.perf_counter()
        m = model_of_T(T)
        slowest = max(slowest, time.perf_counter() - t0)
        worst = max(worst, m.moment_residual)
    ok = worst <= 1e-8 and slowest < 60
    report(capsys, 5, ok, f"max moment residual {worst:.2e} at margin 3, slowest {slowest:.2f} s")


def test_criterion_06_subspace_round_trip(capsys):
    rng = np.random.default_rng(2006)
    shapes = [([1, 1, 1], "last"), ([1, 2, 1], "grade1"), ([2, 1, 1], "last"), ([1, 1, 2], "grade1"),
              ([2, 2], "last"), ([1, 1], "last"), ([1, 2], "grade1"), ([2, 1], "last"),
              ([1, 1, 1], "grade1"), ([1, 3], "last")]
    worst_d, worst_p, equiv = 0.0, 0.0, 0
    for k in range(20):
        grades, kind = shapes[k % len(shapes)]
        T, offs, U = graded_nilpotent(rng, 2, grades)
        H1 = graded_invariant_subspace(rng, grades, offs, U, kind=kind)
        if k in (5, 15):
            H1 = nm.Subspace.zero(sum(grades))
        rt = subspace_round_trip(T, H1)
        worst_d = max(worst_d, rt.distance)
        worst_p = max(worst_p, rt.product_residual)
        equiv += rt.nontrivial_subspace == rt.nontrivial_factorization
    ok = worst_d <= 1e-6 and worst_p <= 1e-8 and equiv == 20
    report(capsys, 6, ok, f"distance {worst_d:.2e}, product residual {worst_p:.2e}, "
                          f"nontriviality equivalence {equiv}/20")


def test_criterion_07_c0_c1_triangulation(capsys):
    rng = np.random.default_rng(2007)
    good = 0
    for k in range(100):
        d = int(rng.integers(1, 5))
        if k % 3 == 0:
            T = random_row_contraction(rng, 2, d, norm=float(rng.uniform(0.3, 0.95)))
        elif k % 3 == 1 or d == 1:
            T = coisometric_tuple(rng, 2, d)
        else:
            T = mixed_tuple(rng, 2, d - 1, 1, float(rng.uniform(0.3, 0.9)))
        tri = triangulate_c0_c1(T)
        ok = tri.residual <= 1e-8 and invariance_residual(T, tri.second) <= 1e-8
        if tri.first.dim:
            ok &= bool(classify_tuple(tri.A).pure_C0)
        if tri.second.dim:
            ok &= bool(classify_tuple(tri.B).C1)
        u = haar_unitary(rng, d)
        moved = triangulate_c0_c1([u.conj().T @ t @ u for t in T])
        ok &= nm.distance(moved.first, nm.Subspace(u.conj().T @ tri.first.basis)) <= 1e-8
        good += bool(ok)
    fixed = triangulate_c0_c1([np.diag([0.0, 1.0])])
    exact = nm.distance(fixed.first, nm.Subspace(np.eye(2)[:, :1]))
    ok = good == 100 and exact == 0
    report(capsys, 7, ok, f"{good}/100 verified, diag(0,1) distance {exact:.1e}")


def test_criterion_08_inner_outer_split(capsys):
    rng = np.random.default_rng(2008)
    worst = 0.0
    for grades, d_co in (([1, 1], 1), ([1], 1), ([1, 1], 2), ([2, 1], 1), ([1, 1, 1], 1)):
        N, _, _ = graded_nilpotent(rng, 2, grades, conjugate=False)
        C = coisometric_tuple(rng, 2, d_co)
        u = haar_unitary(rng, sum(grades) + d_co)
        T = [u @ block_diag(a, b) @ u.conj().T for a, b in zip(N, C)]
        split = c0_c1_from_inner_outer(T)
        worst = max(worst, split.distance, nm.distance(split.H1, split.reference.second))
    report(capsys, 8, worst <= 1e-6, f"max subspace distance {worst:.2e} over 5 fixtures")


def test_criterion_09_similarity(capsys):
    t0 = time.perf_counter()
    X0 = np.array([[1.0, 1.0], [0.0, 1.0]])
    T = X0 @ np.diag([1j, -1j]) @ np.linalg.inv(X0)
    P = asymptotic_P_power_bounded([T]).P
    p_err = float(np.abs(P - [[3, 1], [1, 1]]).max())
    rep = similarity_to_cuntz([T])
    w = rep.W[0]
    u_err = float(np.abs(w @ w.conj().T - np.eye(2)).max())
    bound_ok = rep.c >= 1 / np.linalg.cond(X0) ** 2
    rng = np.random.default_rng(2009)
    inj = 0
    for k in range(20):
        d = int(rng.integers(1, 4))
        mats = coisometric_tuple(rng, 2, d) if k % 2 else random_row_contraction(rng, 2, d)
        r = similarity_to_cuntz(mats)
        inj += r.similar is False and r.reason.startswith("injectivity")
    dt = time.perf_counter() - t0
    ok = p_err <= 1e-10 and u_err <= 1e-10 and bound_ok and rep.similar and inj == 20 and dt < 5
    report(capsys, 9, ok, f"P error {p_err:.1e}, W unitary {u_err:.1e}, c={rep.c:.4f} "
                          f">= {1 / np.linalg.cond(X0) ** 2:.4f}, n=2 injectivity {inj}/20, {dt:.2f} s")


def test_criterion_10_invertible_charfn(capsys):
    shifts = [{0: 0.9}, {0: 0.95, 1: 0.92}, {0: 0.9, 2: 0.97}, {-1: 0.93, 0: 0.91, 1: 0.99},
              {0: 0.96, 3: 0.94}]
    pure = [[np.array([[lam]])] for lam in (0.3, 0.5, 0.7, 0.9)]
    pure.append([np.array([[0.6, 0.3], [0.0, 0.5]])])
    right, norm_ok = 0, True
    for w in shifts:
        theta, cond = weighted_shift_charfn(w)
        v = invertible_charfn_criterion(theta=theta)
        right += v.invertible is True
        norm_ok &= v.theta_inv_norm is not None and v.theta_inv_norm <= cond * (1 + 1e-6)
    for T in pure:
        right += invertible_charfn_criterion(T).invertible is False
    report(capsys, 10, right == 10 and norm_ok, f"{right}/10 verdicts match, norm bound {norm_ok}")


def _cli_docs(tmp_path):
    rng = np.random.default_rng(2011)
    mats, offs, U = graded_nilpotent(rng, 2, [1, 1, 1])
    H1 = graded_invariant_subspace(rng, [1, 1, 1], offs, U)
    nil = dump_tuple(mats)
    nil["subspace"] = nm.to_pairs(H1.basis)
    z = MultiAnalyticOp(1, 1, 1, {(1,): np.eye(1)})
    docs = {
        "half": dump_tuple([np.array([[0.5]])]),
        "coiso": dump_tuple(coisometric_tuple(rng, 2, 2)),
        "nil": nil,
        "rot": dump_tuple([np.array([[1, 1], [0, 1]]) @ np.diag([1j, -1j]) @ np.array([[1, -1], [0, 1]])]),
        "fac": {"theta1": dump_operator(z), "theta2": dump_operator(multiply(z, z)), "N_w": 6},
        "fac2": {"theta1": dump_operator(multiply(z, z)), "theta2": dump_operator(z), "N_w": 6},
    }
    paths = {}
    for key, doc in docs.items():
        paths[key] = tmp_path / f"{key}.json"
        paths[key].write_text(json.dumps(doc))
    return {k: str(v) for k, v in paths.items()}


def test_criterion_11_determinism_and_intertwining(capsys, tmp_path):
    paths = _cli_docs(tmp_path)
    runs = [("validate", "half"), ("classify", "coiso"), ("charfn", "half"), ("dilate", "nil"),
            ("wold", "half"), ("model", "nil"), ("factorize-check", "fac"),
            ("invariant-to-factor", "nil"), ("factor-to-invariant", "fac"), ("inner-outer", "nil"),
            ("similarity", "rot"), ("compare-factors", "fac")]
    stable = 0
    for cmd, key in runs:
        extra = [paths["fac2"]] if cmd == "compare-factors" else []
        texts = []
        for k in range(2):
            out = tmp_path / f"{cmd}-{k}.json"
            main([cmd, paths[key], *extra, "--format", "machine", "--out", str(out)])
            doc = json.loads(out.read_text())
            doc.pop("wall_time")
            texts.append(json.dumps(doc, sort_keys=True))
        stable += texts[0] == texts[1]
    seen, worst, checked = set(), 0.0, 0
    for op in CREATED:
        if id(op) in seen:
            continue
        seen.add(id(op))
        worst = max(worst, intertwining_defect(op, op.deg + 1))
        checked += 1
    ok = stable == len(runs) and worst <= 1e-10
    report(capsys, 11, ok, f"{stable}/{len(runs)} CLI reports byte-stable, "
                           f"{checked} operators with max intertwining defect {worst:.2e}")
