"""Truncated minimal isometric dilation, Wold decomposition and Fourier
representations of wandering subspaces."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from . import words as W
from .charfn import DefectData, defects
from .errors import NotConverged, NotWandering
from .fockspace import TruncatedFock, creation_matrix
from .rowcontraction import mats_of, nilpotency_order, tol_of


@dataclass
class DilationSystem:
    T: list
    N: int
    data: DefectData
    fock: TruncatedFock          # F^2_{<=N-1} (x) D
    V: list
    L_basis: np.ndarray          # canonical basis of L (degree-0 Fock slot)
    L_star_basis: np.ndarray     # image of D_* under Delta_* h -> (I - sum V_i T_i^*) h
    exact: bool
    checks: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.T)

    @property
    def d(self):
        return self.T[0].shape[0]

    @property
    def dim(self):
        return self.d + self.fock.dim

    def embed_H(self) -> np.ndarray:
        out = np.zeros((self.dim, self.d), dtype=complex)
        out[: self.d] = np.eye(self.d)
        return out

    @property
    def L(self) -> nm.Subspace:
        return nm.Subspace(self.L_basis)

    @property
    def L_star(self) -> nm.Subspace:
        return nm.Subspace(self.L_star_basis)


def words_applied(V, basis, max_len: int) -> dict:
    """letters alpha -> V_alpha @ basis for |alpha| <= max_len (V_alpha = V_{i1}...V_{ik})."""
    n = len(V)
    out = {(): np.asarray(basis, dtype=complex)}
    for t in W.letter_tuples(n, max_len):
        if t:
            out[t] = V[t[0] - 1] @ out[t[1:]]
    return out


def build_dilation(T, N: int, tol=None, verify: bool = True) -> DilationSystem:
    """V_i (h + xi) = T_i h + (1 (x) D_i h + e_i (x) xi) on H + F^2_{<=N-1} (x) D."""
    if N < 1:
        raise ValueError("N must be >= 1")
    tol = tol_of(T, tol)
    mats = mats_of(T)
    n, d = len(mats), mats[0].shape[0]
    data = defects(mats, tol)
    r = data.D.dim
    fock = TruncatedFock(n, N - 1, r)
    K = d + fock.dim
    V = []
    for i in range(1, n + 1):
        v = np.zeros((K, K), dtype=complex)
        v[:d, :d] = mats[i - 1]
        if r:
            v[d: d + r, :d] = nm.dagger(data.D.basis) @ data.delta_T @ data.slot(i)
            v[d:, d:] = creation_matrix(fock, i)
        V.append(v)
    Lb = np.zeros((K, r), dtype=complex)
    Lb[d: d + r] = np.eye(r)
    hemb = np.zeros((K, d), dtype=complex)
    hemb[:d] = np.eye(d)
    gen = hemb - sum(V[i] @ hemb @ nm.dagger(mats[i]) for i in range(n))
    Lsb = gen @ np.linalg.pinv(data.delta_T_star, rcond=1e-12) @ data.D_star.basis
    m = nilpotency_order(mats, tol, max_order=N)
    ds = DilationSystem(mats, N, data, fock, V, Lb, Lsb, m is not None and m <= N)
    if verify:
        ds.checks = dilation_checks(ds)
    return ds


def dilation_checks(ds: DilationSystem) -> dict:
    d, n, K = ds.d, ds.n, ds.dim
    keep = np.ones(K, dtype=bool)
    if ds.fock.dim:
        keep[d:] = ds.fock.degree_mask(range(ds.N - 1))
    iso = 0.0
    for i in range(n):
        for j in range(n):
            g = nm.dagger(ds.V[i]) @ ds.V[j]
            target = np.eye(K) if i == j else np.zeros((K, K))
            iso = max(iso, float(np.abs((g - target)[np.ix_(keep, keep)]).max(initial=0.0)))
    adj = max(nm.opnorm(nm.dagger(ds.V[i])[:, :d] - np.vstack(
        [nm.dagger(ds.T[i]), np.zeros((K - d, d))])) for i in range(n))
    # minimality: span{V_alpha H : |alpha| <= N}
    cur = nm.Subspace(ds.embed_H())
    for _ in range(ds.N):
        cur = nm.range_basis(np.hstack([cur.basis] + [v @ cur.basis for v in ds.V]), scale=1.0)
    lstar_orth = nm.opnorm(nm.dagger(ds.L_star_basis) @ ds.L_star_basis - np.eye(ds.L_star_basis.shape[1])) \
        if ds.L_star_basis.shape[1] else 0.0
    return {"isometry_margin": iso, "adjoint_on_H": adj, "span_dim": cur.dim, "dim_K": K,
            "minimal": cur.dim == K, "L_star_orthonormality": lstar_orth}


def wandering_subspaces(ds: DilationSystem, tol=None):
    """(L, L_*) computed as ranges of (V_i - T_i)H and (I - sum V_i T_i^*)H."""
    tol = tol_of(ds.T, tol)
    h = ds.embed_H()
    gens = [ds.V[i] @ h - h @ ds.T[i] for i in range(ds.n)]
    L = nm.range_basis(np.hstack(gens), tol, scale=1.0)
    Ls = nm.range_basis(h - sum(ds.V[i] @ h @ nm.dagger(ds.T[i]) for i in range(ds.n)), tol, scale=1.0)
    if L.dim != ds.data.D.dim or Ls.dim != ds.data.D_star.dim:
        raise ValueError(f"wandering dimensions {L.dim},{Ls.dim} differ from defect ranks "
                         f"{ds.data.D.dim},{ds.data.D_star.dim}")
    return L, Ls


@dataclass
class WoldResult:
    residual: nm.Subspace
    wandering: nm.Subspace
    iterations: int
    leakage: float


def wold(V, tol=None, horizon: int = 200, depth: int | None = None) -> WoldResult:
    """Wold decomposition of a row isometry given by matrices on a finite space."""
    tol = nm._tol(tol)
    V = [nm.as_cmatrix(v) for v in V]
    k = V[0].shape[0]
    if k == 0:
        z = nm.Subspace.zero(0)
        return WoldResult(z, z, 0, 0.0)
    Q = np.eye(k, dtype=complex)
    prev = None
    it = 0
    for it in range(1, horizon + 1):
        nxt = nm.hermitize(sum(v @ Q @ nm.dagger(v) for v in V))
        step = nm.opnorm(nxt - Q)
        Q = nxt
        if step <= 1e-14:
            break
        if prev is not None and prev > 0:
            r = step / prev
            if r < 1 and step * r / (1 - r) <= tol.eq_tol * 1e-2:
                break
        prev = step
    else:
        raise NotConverged(f"Wold iteration not stable within {horizon} steps", residual=step, last=Q)
    w, vec = np.linalg.eigh(Q)
    residual = nm.Subspace(vec[:, w > 0.5])
    wand = nm.complement(nm.range_basis(np.hstack(V), tol, scale=1.0))
    depth = k if depth is None else depth
    span = nm.Subspace(wand.basis)
    for _ in range(depth):
        if span.dim + residual.dim >= k:
            break
        grown = nm.range_basis(np.hstack([span.basis] + [v @ span.basis for v in V]), tol, scale=1.0)
        if grown.dim == span.dim:
            break
        span = grown
    total = nm.subspace_sum(residual, span, tol)
    leak = float(np.abs(w[(w > tol.eq_tol) & (w < 1 - tol.eq_tol)]).max(initial=0.0))
    leak = max(leak, (k - total.dim) / max(k, 1))
    return WoldResult(residual, wand, it, leak)


@dataclass
class FourierRep:
    embedding: np.ndarray   # columns V_alpha w_j, word-major
    space: TruncatedFock
    intertwining_residual: float

    def coords(self, x):
        return nm.dagger(self.embedding) @ x


def fourier_representation(V, Wsub: nm.Subspace, margin: int, tol=None) -> FourierRep:
    """Unitary from span{V_alpha W : |alpha| <= margin} onto F^2_{<=margin} (x) C^{dim W}."""
    tol = nm._tol(tol)
    V = [nm.as_cmatrix(v) for v in V]
    n = len(V)
    k = Wsub.dim
    space = TruncatedFock(n, margin, k)
    moved = words_applied(V, Wsub.basis, margin)
    emb = np.zeros((Wsub.ambient_dim, space.dim), dtype=complex)
    for t in space.letters:
        emb[:, space.slot(t)] = moved[t]
    if k:
        gram = nm.dagger(emb) @ emb
        err = float(np.abs(gram - np.eye(space.dim)).max())
        if err > tol.eq_tol:
            raise NotWandering(f"V_alpha W not orthonormal (residual {err:.2e})")
    worst = 0.0
    if k and margin >= 1:
        low = space.degree_mask(range(margin))
        for i in range(1, n + 1):
            s = creation_matrix(space, i)
            lhs = nm.dagger(emb) @ V[i - 1] @ emb[:, low]
            worst = max(worst, nm.opnorm(lhs - s[:, low]))
    return FourierRep(emb, space, worst)
