"""Characteristic function of a row contraction: defects, symbol evaluation,
coefficient extraction by basis pairing, and the dilation-geometric version."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from . import words as W
from .fockspace import TruncatedFock
from .multianalytic import MultiAnalyticOp
from .rowcontraction import mats_of, phi, tol_of


@dataclass
class DefectData:
    delta_T_star: np.ndarray   # d x d
    delta_T: np.ndarray        # nd x nd
    D_star: nm.Subspace        # range of delta_T_star in C^d
    D: nm.Subspace             # range of delta_T in C^{nd}
    n: int
    d: int

    def slot(self, i: int) -> np.ndarray:
        """Injection of C^d into slot i (1-based) of C^{nd}."""
        out = np.zeros((self.n * self.d, self.d), dtype=complex)
        out[(i - 1) * self.d: i * self.d, :] = np.eye(self.d)
        return out


def defects(T, tol=None) -> DefectData:
    """Delta_{T*} = (I - sum T_i T_i^*)^{1/2} and Delta_T = (I - T^* T)^{1/2}."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    d, n = mats[0].shape[0], len(mats)
    row = np.hstack(mats)
    sq_star = nm.hermitize(np.eye(d) - phi(mats, np.eye(d)))
    sq = nm.hermitize(np.eye(n * d) - nm.dagger(row) @ row)
    ds = nm.psd_sqrt(sq_star, tol, cutoff=tol.rank_tol)
    dd = nm.psd_sqrt(sq, tol, cutoff=tol.rank_tol)
    return DefectData(ds, dd, nm.range_basis(sq_star, tol, scale=1.0),
                      nm.range_basis(sq, tol, scale=1.0), n, d)


def adjoint_words(T, max_len: int) -> dict:
    """letters -> T_alpha^* for |alpha| <= max_len (T_alpha = T_{i1}...T_{ik})."""
    mats = mats_of(T)
    d = mats[0].shape[0]
    out = {(): np.eye(d, dtype=complex)}
    adj = [nm.dagger(t) for t in mats]
    for t in W.letter_tuples(len(mats), max_len):
        if not t:
            continue
        # T_{beta j}^* = T_j^* T_beta^*
        out[t] = adj[t[-1] - 1] @ out[t[:-1]]
    return out


def char_symbol(T, h, N_w: int, tol=None, data: DefectData | None = None,
                adjoints: dict | None = None) -> np.ndarray:
    """theta_T(h) on F^2_{<=N_w} (x) D_*, h given in D coordinates.

    ``h`` may be a matrix whose columns are evaluated together.
    """
    tol = tol_of(T, tol)
    mats = mats_of(T)
    n = len(mats)
    data = defects(mats, tol) if data is None else data
    h = np.asarray(h, dtype=complex)
    single = h.ndim == 1
    hm = h.reshape(data.D.dim, 1) if single else h.reshape(data.D.dim, -1)
    v = data.D.basis @ hm                          # in C^{nd}
    bs = data.D_star.basis
    r_star = bs.shape[1]
    space = TruncatedFock(n, N_w, r_star)
    out = np.zeros((space.dim, hm.shape[1]), dtype=complex)
    full_deg0 = -np.hstack(mats) @ v
    out[space.slot(())] = nm.dagger(bs) @ full_deg0
    leak = nm.opnorm(full_deg0 - bs @ (nm.dagger(bs) @ full_deg0))
    if N_w >= 1:
        adjoints = adjoint_words(mats, N_w - 1) if adjoints is None else adjoints
        dv = data.delta_T @ v
        d = data.d
        slots = [dv[(i - 1) * d: i * d] for i in range(1, n + 1)]
        for beta in W.letter_tuples(n, N_w - 1):
            tb = data.delta_T_star @ adjoints[beta]
            for i in range(1, n + 1):
                full = tb @ slots[i - 1]
                out[space.slot((i,) + beta)] = nm.dagger(bs) @ full
    if leak > tol.eq_tol * max(1.0, nm.opnorm(hm)):
        raise ValueError(f"degree-0 symbol component leaves D_* ({leak:.2e})")
    return out[:, 0] if single else out


def char_fn(T, deg: int, tol=None) -> MultiAnalyticOp:
    """Theta_T with coefficients up to degree deg, extracted by pairing the
    symbol with Fock basis vectors: theta_(alpha) k = component at e_{reversed alpha}."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    n = len(mats)
    data = defects(mats, tol)
    r, r_star = data.D.dim, data.D_star.dim
    space = TruncatedFock(n, deg, r_star)
    if r == 0 or r_star == 0:
        return MultiAnalyticOp(n, r, r_star, {}, deg=deg)
    sym = char_symbol(mats, np.eye(r), deg, tol, data)
    coeffs = {}
    for t in space.letters:
        coeffs[t[::-1]] = sym[space.slot(t), :]
    return MultiAnalyticOp(n, r, r_star, coeffs, deg=deg)


def symbol_gram_closed_form(T, deg: int, tol=None) -> np.ndarray:
    """Gram of the columns 1 (x) h of the degree-deg truncation, from Phi iterates:
    T^*T + Delta (I_n (x) sum_{k<deg} Phi^k(Delta_*^2)) Delta, compressed to D."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    n = len(mats)
    data = defects(mats, tol)
    d = data.d
    row = np.hstack(mats)
    acc = np.zeros((d, d), dtype=complex)
    cur = data.delta_T_star @ data.delta_T_star
    for _ in range(deg):
        acc += cur
        cur = phi(mats, cur)
    mid = np.kron(np.eye(n), acc)
    g = nm.dagger(row) @ row + data.delta_T @ mid @ data.delta_T
    return nm.dagger(data.D.basis) @ g @ data.D.basis


def poisson_kernel(T, N_w: int, tol=None) -> np.ndarray:
    """h -> sum_{|alpha| <= N_w} e_alpha (x) Delta_* T_alpha^* h, in D_* coordinates."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    n = len(mats)
    data = defects(mats, tol)
    bs = data.D_star.basis
    space = TruncatedFock(n, N_w, bs.shape[1])
    adj = adjoint_words(mats, N_w)
    out = np.zeros((space.dim, data.d), dtype=complex)
    for t in space.letters:
        out[space.slot(t)] = nm.dagger(bs) @ data.delta_T_star @ adj[t]
    return out


def char_fn_geometric(ds, deg: int | None = None, tol=None) -> MultiAnalyticOp:
    """Theta_L = Phi^{L_*} P_{M_V(L_*)} restricted to M_V(L), composed with (Phi^L)^*."""
    from .dilation import words_applied

    tol = tol_of(ds.T, tol)
    deg = ds.N - 1 if deg is None else deg
    if deg > ds.N - 1:
        raise ValueError("degree exceeds the exactly represented range N-1")
    Lb = ds.L_basis
    Lsb = ds.L_star_basis
    r, r_star = Lb.shape[1], Lsb.shape[1]
    if r == 0 or r_star == 0:
        return MultiAnalyticOp(ds.n, r, r_star, {}, deg=deg)
    moved = words_applied(ds.V, Lsb, deg)
    coeffs = {}
    for t, vecs in moved.items():
        coeffs[t[::-1]] = nm.dagger(vecs) @ Lb
    return MultiAnalyticOp(ds.n, r, r_star, coeffs, deg=deg)


def charfn_degree(T, cap: int = 60, tol=None):
    """Smallest k with Delta_* T_beta^* = 0 for all |beta| = k, i.e. the last
    nonzero coefficient degree of Theta_T (None if not reached by cap)."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    data = defects(mats, tol)
    cur = data.delta_T_star @ data.delta_T_star
    for k in range(cap + 1):
        if nm.opnorm(cur) <= tol.eq_tol ** 2:
            return k
        cur = phi(mats, cur)
    return None
