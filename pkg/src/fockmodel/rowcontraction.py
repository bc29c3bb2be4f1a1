"""Row contractions, the map Phi(X) = sum T_i X T_i^*, class tests and the
two triangulations (coisometric / c.n.c. and C.0 / C.1)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .errors import NotConverged, NotPSD, StructureViolation


class RowContraction:
    """n-tuple of d x d matrices with I - sum T_i T_i^* >= -eq_tol."""

    def __init__(self, T, tol: nm.Tolerance | None = None, check: bool = True):
        mats = [nm.as_cmatrix(t) for t in T]
        if not mats:
            raise ValueError("need at least one matrix")
        d = mats[0].shape[0]
        for m in mats:
            if m.shape != (d, d):
                raise ValueError("all entries must be square of equal size")
        self.T = mats
        self.tol = nm._tol(tol)
        if check:
            w = np.linalg.eigvalsh(nm.hermitize(np.eye(d) - phi(mats, np.eye(d)))) if d else np.zeros(0)
            if w.size and w.min() < -self.tol.eq_tol:
                raise NotPSD(f"I - sum T_i T_i^* has eigenvalue {w.min():.3e}")

    @property
    def n(self):
        return len(self.T)

    @property
    def d(self):
        return self.T[0].shape[0]

    def __iter__(self):
        return iter(self.T)

    def __len__(self):
        return len(self.T)

    def __getitem__(self, i):
        return self.T[i]

    def conjugate(self, u):
        """Tuple u^H T_i u (change of orthonormal basis)."""
        return RowContraction([nm.dagger(u) @ t @ u for t in self.T], self.tol, check=False)

    def row(self):
        return np.hstack(self.T)


def mats_of(T) -> list:
    if isinstance(T, RowContraction):
        return T.T
    return [nm.as_cmatrix(t) for t in T]


def tol_of(T, tol=None):
    if tol is not None:
        return tol
    if isinstance(T, RowContraction):
        return T.tol
    return nm.DEFAULT_TOL


def phi(T, X):
    mats = mats_of(T)
    return sum(t @ X @ nm.dagger(t) for t in mats)


def phi_iterate(T, k: int, X=None) -> np.ndarray:
    """Phi^k(X) (default X = I) by k applications of Phi."""
    if k < 0:
        raise ValueError("k must be >= 0")
    mats = mats_of(T)
    d = mats[0].shape[0]
    cur = np.eye(d, dtype=complex) if X is None else nm.as_cmatrix(X)
    for _ in range(k):
        cur = nm.hermitize(phi(mats, cur))
    return cur


def word_product(T, letters) -> np.ndarray:
    """T_alpha = T_{i1} ... T_{ik}."""
    mats = mats_of(T)
    d = mats[0].shape[0]
    out = np.eye(d, dtype=complex)
    for x in letters:
        out = out @ mats[x - 1]
    return out


@dataclass
class LimitResult:
    limit: np.ndarray
    converged: bool
    iterations: int
    residual: float
    history: list = field(default_factory=list)


def asymptotic_limit(T, horizon: int = 200, tol=None, raise_on_fail: bool = True) -> LimitResult:
    """lim_k Phi^k(I) with a geometric tail estimate as stopping rule."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    d = mats[0].shape[0]
    cur = np.eye(d, dtype=complex)
    target = tol.eq_tol * 1e-2
    prev_step = None
    step = np.inf
    hist = []
    for k in range(1, horizon + 1):
        nxt = nm.hermitize(phi(mats, cur))
        step = nm.opnorm(nxt - cur)
        hist.append(step)
        cur = nxt
        if step <= 1e-15:
            return LimitResult(cur, True, k, step, hist)
        if prev_step is not None and prev_step > 0:
            r = step / prev_step
            if r < 1 and step * r / (1 - r) <= target:
                return LimitResult(cur, True, k, step, hist)
        prev_step = step
    if raise_on_fail:
        raise NotConverged(f"Phi^k(I) not converged within {horizon} steps", residual=step, last=cur)
    return LimitResult(cur, False, horizon, step, hist)


def nilpotency_order(T, tol=None, max_order: int | None = None):
    """Smallest m with Phi^m(I) = 0 within eq_tol (None if not nilpotent)."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    d = mats[0].shape[0]
    max_order = d + 1 if max_order is None else max_order
    cur = np.eye(d, dtype=complex)
    for m in range(0, max_order + 1):
        if nm.opnorm(cur) <= tol.eq_tol:
            return m
        cur = phi(mats, cur)
    return None


def power_bound(T, horizon: int = 200):
    """(M^2 estimate, bounded flag) from the probe sequence ||Phi^k(I)||."""
    mats = mats_of(T)
    d = mats[0].shape[0]
    cur = np.eye(d, dtype=complex)
    norms = [1.0]
    for _ in range(horizon):
        cur = phi(mats, cur)
        nrm = nm.opnorm(cur)
        norms.append(nrm)
        if not np.isfinite(nrm) or nrm > 1e12:
            return float(max(norms)), False
    half = len(norms) // 2
    early = max(norms[: half + 1])
    late = max(norms[half:])
    bounded = late <= 1.5 * early + 1e-12
    return float(max(norms)), bool(bounded)


def compute_Hc(T, tol=None) -> nm.Subspace:
    """Largest subspace of ker(I - Phi(I)) invariant under every T_i^*."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    d = mats[0].shape[0]
    cur = nm.kernel_basis(np.eye(d) - phi(mats, np.eye(d)), tol, scale=1.0)
    for _ in range(d + 1):
        if cur.dim == 0:
            break
        nxt = cur
        for t in mats:
            nxt = nm.preimage(nm.dagger(t), cur, domain=nxt, tol=tol)
        if nxt.dim == cur.dim:
            break
        cur = nxt
    return cur


def is_invariant(T, M: nm.Subspace, tol=None) -> bool:
    """T_i M subset of M for all i."""
    return invariance_residual(T, M) <= tol_of(T, tol).eq_tol


def invariance_residual(T, M: nm.Subspace, adjoint: bool = False) -> float:
    mats = mats_of(T)
    if M.dim == 0:
        return 0.0
    p_perp = np.eye(M.ambient_dim) - M.projector()
    worst = 0.0
    for t in mats:
        op = nm.dagger(t) if adjoint else t
        worst = max(worst, nm.opnorm(p_perp @ op @ M.basis))
    return worst


def coisometric_invariance_test(T, M: nm.Subspace, tol=None) -> bool:
    """For coisometric T: M is invariant iff sum T_i P_M T_i^* <= P_M."""
    tol = tol_of(T, tol)
    p = M.projector()
    gap = p - phi(T, p)
    return float(np.linalg.eigvalsh(nm.hermitize(gap)).min()) >= -tol.eq_tol


@dataclass
class TupleClass:
    pure_C0: bool | None
    C1: bool | None
    coisometric: bool
    cnc: bool
    power_bounded: bool
    power_bound_sq: float
    converged: bool
    limit: np.ndarray | None

    def as_dict(self):
        return {"pure_C0": self.pure_C0, "C1": self.C1, "coisometric": self.coisometric,
                "cnc": self.cnc, "power_bounded": self.power_bounded,
                "power_bound_sq": self.power_bound_sq, "converged": self.converged}


def classify_tuple(T, horizon: int = 200, tol=None) -> TupleClass:
    tol = tol_of(T, tol)
    mats = mats_of(T)
    d = mats[0].shape[0]
    lim = asymptotic_limit(mats, horizon, tol, raise_on_fail=False)
    coiso = nm.opnorm(phi(mats, np.eye(d)) - np.eye(d)) <= tol.eq_tol
    cnc = compute_Hc(mats, tol).dim == 0
    msq, bounded = power_bound(mats, horizon)
    if lim.converged:
        pure = nm.opnorm(lim.limit) <= tol.eq_tol
        kern = limit_kernel(lim.limit, tol)
        c1 = kern.dim == 0
    else:
        pure = c1 = None
    return TupleClass(pure, c1, bool(coiso), bool(cnc), bounded, msq, lim.converged,
                      lim.limit if lim.converged else None)


def limit_kernel(L, tol) -> nm.Subspace:
    """Kernel of the PSD limit: eigenvalues at most eq_tol."""
    L = nm.hermitize(nm.as_cmatrix(L))
    w, v = np.linalg.eigh(L)
    return nm.Subspace(v[:, w <= tol.eq_tol])


@dataclass
class Triangulation:
    first: nm.Subspace
    second: nm.Subspace
    A: list
    B: list
    residual: float
    checks: dict


def _blocks(mats, first: nm.Subspace, second: nm.Subspace):
    U = np.hstack([first.basis, second.basis])
    k = first.dim
    A, B, worst = [], [], 0.0
    for t in mats:
        tt = nm.dagger(U) @ t @ U
        A.append(tt[:k, :k])
        B.append(tt[k:, k:])
        if k and tt.shape[0] > k:
            worst = max(worst, nm.opnorm(tt[:k, k:]))
    return A, B, worst


def triangulate_c_cnc(T, tol=None) -> Triangulation:
    """H = H_c (+) H_cnc; T_i lower triangular with A coisometric, B c.n.c."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    Hc = compute_Hc(mats, tol)
    Hcnc = nm.complement(Hc)
    A, B, upper = _blocks(mats, Hc, Hcnc)
    checks = {"upper_right": upper}
    if Hc.dim:
        checks["A_coisometry"] = nm.opnorm(phi(A, np.eye(Hc.dim)) - np.eye(Hc.dim))
    if Hcnc.dim:
        checks["B_Hc_dim"] = compute_Hc(B, tol).dim
    if upper > tol.eq_tol or checks.get("A_coisometry", 0.0) > tol.eq_tol or checks.get("B_Hc_dim", 0):
        raise StructureViolation(f"c/cnc triangulation failed: {checks}")
    return Triangulation(Hc, Hcnc, A, B, upper, checks)


def triangulate_c0_c1(T, horizon: int = 200, tol=None, verify: bool = True) -> Triangulation:
    """H = H_0 (+) H_1 with H_0 = ker lim Phi^k(I); A of class C.0, B of class C.1."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    lim = asymptotic_limit(mats, horizon, tol)
    H0 = limit_kernel(lim.limit, tol)
    H1 = nm.complement(H0)
    A, B, upper = _blocks(mats, H0, H1)
    checks = {"upper_right": upper,
              "adjoint_invariance": invariance_residual(mats, H0, adjoint=True)}
    if verify:
        if H0.dim:
            la = asymptotic_limit(A, horizon, tol)
            checks["A_limit_norm"] = nm.opnorm(la.limit)
        if H1.dim:
            lb = asymptotic_limit(B, horizon, tol)
            checks["B_kernel_dim"] = limit_kernel(lb.limit, tol).dim
        bad = (upper > tol.eq_tol or checks["adjoint_invariance"] > tol.eq_tol
               or checks.get("A_limit_norm", 0.0) > tol.eq_tol or checks.get("B_kernel_dim", 0))
        if bad:
            raise StructureViolation(f"C.0/C.1 triangulation failed: {checks}")
    return Triangulation(H0, H1, A, B, upper, checks)
