"""Functional models of row contractions built from a contractive
multi-analytic operator, and the round trip from a c.n.c. tuple to its model.

Truncation: outputs live in F^2_{<=N_w} (x) E_*.  Defect vectors Delta g are
represented for inputs g of degree <= N_w - deg (where the operator is exactly
represented) through the Gram identity Delta^2 = I - A^* A.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from . import words as W
from .charfn import char_fn, charfn_degree, poisson_kernel
from .errors import IllConditioned, NotCNC, TruncationUnstable
from .fockspace import TruncatedFock, creation_matrix
from .multianalytic import (MultiAnalyticOp, coincides, exact_matrix,
                            pure_unitary_decomposition, to_matrix)
from .rowcontraction import compute_Hc, mats_of, phi, tol_of, word_product

COND_LIMIT = 1e8


@dataclass
class DefectGeometry:
    """Coordinates for the closure of Delta_Theta(F^2 (x) E) at truncation."""
    theta: MultiAnalyticOp
    N_w: int
    dom: TruncatedFock          # inputs of degree <= N_w - deg
    full_in: TruncatedFock      # inputs of degree <= N_w
    out: TruncatedFock
    A_sq: np.ndarray            # to_matrix on F^2_{<=N_w}
    A_t: np.ndarray             # exact columns (dom)
    Y: np.ndarray               # defect coordinates of dom inputs: Y^H Y = I - A_t^H A_t
    pair: np.ndarray            # y -> (J - A_sq^H A_t) g with Y g = y; pairs y against all inputs
    cutoff: float

    @property
    def rank(self):
        return self.Y.shape[0]


def defect_geometry(theta: MultiAnalyticOp, N_w: int, tol=None,
                    cutoff: float | None = None) -> DefectGeometry:
    """``cutoff`` zeroes eigenvalues of I - A^H A at or below it (default rank_tol)."""
    tol = nm._tol(tol)
    cutoff = tol.rank_tol if cutoff is None else cutoff
    if N_w < theta.deg:
        raise ValueError("N_w below the coefficient degree")
    n = theta.n
    dom = TruncatedFock(n, N_w - theta.deg, theta.dim_in)
    full_in = TruncatedFock(n, N_w, theta.dim_in)
    out = TruncatedFock(n, N_w, theta.dim_out)
    A_sq = to_matrix(theta, N_w)
    A_t = exact_matrix(theta, N_w)
    gram = nm.hermitize(np.eye(dom.dim) - nm.dagger(A_t) @ A_t)
    delta = nm.psd_sqrt(gram, tol, cutoff=cutoff)
    rng = nm.range_basis(delta, tol, scale=1.0)
    Y = nm.dagger(rng.basis) @ delta
    J = np.zeros((full_in.dim, dom.dim), dtype=complex)
    J[: dom.dim] = np.eye(dom.dim)
    if rng.dim:
        pinv = np.linalg.pinv(Y, rcond=1e-12)
        pair = (J - nm.dagger(A_sq) @ A_t) @ pinv
    else:
        pair = np.zeros((full_in.dim, 0), dtype=complex)
    return DefectGeometry(theta, N_w, dom, full_in, out, A_sq, A_t, Y, pair, cutoff)


@dataclass
class DefectIsometry:
    C: list
    is_cuntz: bool
    cuntz_residual: float
    gram_residual: float
    cond: float


def defect_row_isometry(theta: MultiAnalyticOp, N_w: int, tol=None,
                        geom: DefectGeometry | None = None) -> DefectIsometry:
    """C_i (Delta g) = Delta (S_i (x) I) g in defect coordinates.

    C_i is defined on the defect images of inputs below the top degree of the
    exact domain and is zero on the rest, mirroring the Fock truncation.
    """
    tol = nm._tol(tol)
    geom = defect_geometry(theta, N_w, tol) if geom is None else geom
    r = geom.rank
    n = theta.n
    if r == 0:
        return DefectIsometry([np.zeros((0, 0), dtype=complex)] * n, True, 0.0, 0.0, 1.0)
    low = geom.dom.degree_mask(range(geom.dom.max_deg))
    Y_low = geom.Y[:, low]
    s = np.linalg.svd(Y_low, compute_uv=False) if Y_low.size else np.zeros(0)
    kept = s[s > tol.rank_tol * max(s.max(initial=0.0), 1e-300)] if s.size else s
    cond = float(kept.max() / kept.min()) if kept.size else 1.0
    if cond > COND_LIMIT:
        raise IllConditioned(f"defect coordinates have condition number {cond:.2e}")
    pinv = np.linalg.pinv(Y_low, rcond=tol.rank_tol) if Y_low.size else np.zeros((0, r))
    C, worst = [], 0.0
    shifted = []
    for i in range(1, n + 1):
        s_i = creation_matrix(geom.dom, i)
        ys = (geom.Y @ s_i)[:, low]
        shifted.append(ys)
        C.append(ys @ pinv)
    g0 = nm.dagger(Y_low) @ Y_low
    for i in range(n):
        for j in range(n):
            g = nm.dagger(shifted[i]) @ shifted[j]
            target = g0 if i == j else 0.0
            worst = max(worst, float(np.abs(g - target).max(initial=0.0)))
    deg0 = geom.dom.degree_mask([0])
    higher = ~deg0
    rest = nm.range_basis(geom.Y[:, higher], tol, scale=1.0) if higher.any() else nm.Subspace.zero(r)
    y0 = geom.Y[:, deg0]
    resid = y0 - rest.basis @ (nm.dagger(rest.basis) @ y0)
    cres = nm.opnorm(resid)
    return DefectIsometry(C, cres <= tol.eq_tol, cres, worst, cond)


@dataclass
class ModelSpace:
    theta: MultiAnalyticOp
    N_w: int
    geom: DefectGeometry
    H_bold: nm.Subspace         # inside F^2_{<=N_w} (x) E_*  (+)  defect coordinates

    @property
    def out_dim(self):
        return self.geom.out.dim

    @property
    def K_dim(self):
        return self.geom.out.dim + self.geom.rank


@dataclass
class Model:
    space: ModelSpace
    T: list                     # model tuple on H_bold coordinates
    V: list                     # (S_i (x) I) (+) C_i on K_bold
    defect: DefectIsometry
    checks: dict = field(default_factory=dict)

    @property
    def H_bold(self):
        return self.space.H_bold


def model_from_theta(theta: MultiAnalyticOp, N_w: int, tol=None,
                     geom: DefectGeometry | None = None) -> Model:
    """Model tuple: T_i^* (f + Delta g) = (S_i^* (x) I) f + C_i^* Delta g, on
    H_bold = K_bold minus the graph {Theta g + Delta g}."""
    tol = nm._tol(tol)
    geom = defect_geometry(theta, N_w, tol) if geom is None else geom
    iso = defect_row_isometry(theta, N_w, tol, geom)
    r = geom.rank
    # (x, y) in H_bold  <=>  A_sq^H x + pair y = 0
    constraint = np.hstack([nm.dagger(geom.A_sq), geom.pair])
    Hb = nm.kernel_basis(constraint, tol, scale=1.0)
    space = ModelSpace(theta, N_w, geom, Hb)
    mo = geom.out.dim
    V = []
    for i in range(1, theta.n + 1):
        v = np.zeros((mo + r, mo + r), dtype=complex)
        v[:mo, :mo] = creation_matrix(geom.out, i)
        if r:
            v[mo:, mo:] = iso.C[i - 1]
        V.append(v)
    Q = Hb.basis
    T = [nm.dagger(Q) @ v @ Q for v in V]
    inv = 0.0
    if Hb.dim:
        perp = np.eye(mo + r) - Hb.projector()
        inv = max(nm.opnorm(perp @ nm.dagger(v) @ Q) for v in V)
    graph = np.vstack([geom.A_t, geom.Y])
    graph_res = float(np.abs(nm.dagger(graph) @ graph - np.eye(geom.dom.dim)).max()) \
        if geom.dom.dim else 0.0
    checks = {"adjoint_invariance": inv, "graph_isometry": graph_res,
              "dim_H": Hb.dim, "dim_K": mo + r, "cuntz": iso.is_cuntz,
              "cuntz_residual": iso.cuntz_residual, "defect_gram": iso.gram_residual}
    if Hb.dim:
        checks["cnc"] = compute_Hc(T, tol).dim == 0
    return Model(space, T, V, iso, checks)


def moment_distance(T, S, U, margin: int = 3) -> float:
    """max over |alpha|,|beta| <= margin of ||T_alpha T_beta^* - U^H S_alpha S_beta^* U||."""
    mats_t, mats_s = mats_of(T), mats_of(S)
    n = len(mats_t)
    worst = 0.0
    words = W.letter_tuples(n, margin)
    pt = {w: word_product(mats_t, w) for w in words}
    ps = {w: nm.dagger(U) @ word_product(mats_s, w) for w in words}
    ps_adj = {w: nm.dagger(word_product(mats_s, w)) @ U for w in words}
    for a in words:
        for b in words:
            lhs = pt[a] @ nm.dagger(pt[b])
            rhs = ps[a] @ ps_adj[b]
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


@dataclass
class ModelOfT:
    model: Model
    theta: MultiAnalyticOp
    U: np.ndarray               # H -> H_bold coordinates
    moment_residual: float
    embedding_residual: float
    margin: int


def _default_degree(mats, tol, cap: int = 60):
    m = charfn_degree(mats, cap, tol)
    if m is None:
        raise TruncationUnstable(f"characteristic function has not decayed by degree {cap}; pass deg")
    return max(m, 1)


def _default_working_degree(mats, deg, tol, cap: int = 120):
    # the model kernel is a near-null space of the finite section, whose
    # smallest singular value is about ||Phi^{N_w}(I)||^{1/2}
    cur = np.eye(mats[0].shape[0], dtype=complex)
    k = 0
    while k < cap and (k <= deg or np.sqrt(nm.opnorm(cur)) > 0.01 * tol.rank_tol):
        cur = phi(mats, cur)
        k += 1
    return max(k, deg + 1)


def model_of_T(T, N_w: int | None = None, deg: int | None = None, tol=None,
               margin: int = 3) -> ModelOfT:
    """Model of a c.n.c. tuple, with the unitary H -> H_bold read off the
    Poisson kernel h -> sum e_alpha (x) Delta_* T_alpha^* h."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    if compute_Hc(mats, tol).dim:
        raise NotCNC("tuple has a nonzero coisometric part")
    deg = _default_degree(mats, tol) if deg is None else deg
    N_w = _default_working_degree(mats, deg, tol) if N_w is None else N_w
    theta = char_fn(mats, deg, tol)
    mdl = model_from_theta(theta, N_w, tol)
    kern = poisson_kernel(mats, N_w, tol)
    Q = mdl.H_bold.basis
    mo = mdl.space.out_dim
    Qx = Q[:mo]
    U = np.linalg.pinv(Qx, rcond=1e-10) @ kern
    emb_res = nm.opnorm(Qx @ U - kern)
    mres = moment_distance(mats, mdl.T, U, margin)
    return ModelOfT(mdl, theta, U, mres, emb_res, margin)


@dataclass
class PurePartCheck:
    status: str                 # "coincide", "differ" or "hypothesis not met"
    coincide: bool | None
    residual: float | None
    model_dim: int


def model_charfn_is_pure_part(theta: MultiAnalyticOp, N_w: int, tol=None,
                              deg: int | None = None) -> PurePartCheck:
    """Compare the characteristic function of the model with the purely
    contractive part of theta."""
    tol = nm._tol(tol)
    mdl = model_from_theta(theta, N_w, tol)
    if not mdl.defect.is_cuntz:
        return PurePartCheck("hypothesis not met", None, None, mdl.H_bold.dim)
    parts = pure_unitary_decomposition(theta, tol)
    pure = parts.pure
    if mdl.H_bold.dim == 0:
        ok = pure.dim_in == 0 and pure.dim_out == 0
        return PurePartCheck("coincide" if ok else "differ", ok, 0.0, 0)
    deg = theta.deg if deg is None else deg
    cf = char_fn(mdl.T, deg, tol)
    res = coincides(cf, pure.truncate(deg), tol)
    return PurePartCheck("coincide" if res.coincide else "differ", res.coincide,
                         res.residual, mdl.H_bold.dim)
