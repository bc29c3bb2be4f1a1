"""Regular factorizations Theta = Theta_2 Theta_1: the isometry X_Theta,
regularity, the correspondence with joint invariant subspaces of the model,
and the comparison of two factorizations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from . import words as W
from .charfn import char_fn, char_fn_geometric, charfn_degree, poisson_kernel
from .dilation import build_dilation, fourier_representation, words_applied
from .errors import (NotCNC, NotComparable, NotInvariant, NotRegular, StructureViolation,
                     TruncationUnstable)
from .model import (DefectGeometry, Model, defect_geometry, defect_row_isometry,
                    model_from_theta)
from .multianalytic import (MultiAnalyticOp, classify, coefficient_distance, coincides,
                            inner_outer_factorize, multiply, pure_unitary_decomposition)
from .rowcontraction import (compute_Hc, invariance_residual, mats_of, tol_of,
                             triangulate_c0_c1)

# eigenvalues of I - A^H A below this are treated as exact zeros when X is built;
# small enough that dropping them moves Gram identities by far less than 1e-10
X_CUTOFF = 1e-12


@dataclass
class Factorization:
    theta: MultiAnalyticOp
    theta1: MultiAnalyticOp
    theta2: MultiAnalyticOp
    N_w: int
    geom: DefectGeometry        # Theta on inputs of degree <= N_w - D
    geom1: DefectGeometry       # Theta_1 on the same inputs
    geom2: DefectGeometry       # Theta_2 on inputs of degree <= N_w - D_2
    X: np.ndarray               # defect coords of Theta -> (Delta_2 coords) (+) (Delta_1 coords)
    Z: np.ndarray
    regular: bool
    regular_residual: float
    isometry_residual: float
    probe_deg: int
    details: dict = field(default_factory=dict)

    @property
    def ranks(self):
        return self.geom.rank, self.geom1.rank, self.geom2.rank


def _membership_residual(Z, gens, tol):
    if gens.shape[1] == 0:
        return 0.0
    if Z.shape[1] == 0 or not np.any(Z):
        return float(np.linalg.norm(gens, axis=0).max())
    rng = nm.range_basis(Z, tol, scale=1.0)
    resid = gens - rng.basis @ (nm.dagger(rng.basis) @ gens)
    return float(np.linalg.norm(resid, axis=0).max())


def _assemble(theta1, theta2, N_w, tol, probe_deg, cutoff):
    d2 = theta2.deg
    theta = multiply(theta2, theta1)
    geom = defect_geometry(theta, N_w, tol, cutoff)
    geom1 = defect_geometry(theta1, N_w - d2, tol, cutoff)
    geom2 = defect_geometry(theta2, N_w, tol, cutoff)
    A1 = geom1.A_t                       # dom -> inputs of Theta_2 with degree <= N_w - d2
    Y, Y1, Y2 = geom.Y, geom1.Y, geom2.Y
    Z = np.vstack([Y2 @ A1, Y1])
    r, r1, r2 = Y.shape[0], Y1.shape[0], Y2.shape[0]
    if r:
        X = Z @ np.linalg.pinv(Y, rcond=1e-12)
    else:
        X = np.zeros((r1 + r2, 0), dtype=complex)
    gram = nm.dagger(Z) @ Z - nm.dagger(Y) @ Y
    res = float(np.abs(gram).max(initial=0.0))
    res = max(res, float(np.abs(X @ Y - Z).max(initial=0.0)))
    if r:
        res = max(res, float(np.abs(nm.dagger(X) @ X - np.eye(r)).max()))
    # regularity: low-degree generators Delta_2 g (+) 0 and 0 (+) Delta_1 f lie in range Z
    g_mask = geom2.dom.degree_mask(range(min(probe_deg, geom2.dom.max_deg) + 1))
    f_mask = geom1.dom.degree_mask(range(min(probe_deg, geom1.dom.max_deg) + 1))
    gens = np.zeros((r2 + r1, int(g_mask.sum() + f_mask.sum())), dtype=complex)
    k = int(g_mask.sum())
    gens[:r2, :k] = Y2[:, g_mask]
    gens[r2:, k:] = Y1[:, f_mask]
    reg_res = _membership_residual(Z, gens, tol)
    return theta, geom, geom1, geom2, X, Z, res, reg_res


def build_X(theta1: MultiAnalyticOp, theta2: MultiAnalyticOp, N_w: int | None = None,
            tol=None, probe_deg: int = 1, check_stability: bool = True,
            cutoff: float = X_CUTOFF) -> Factorization:
    """X (Delta_Theta f) = Delta_2 Theta_1 f (+) Delta_1 f on defect coordinates.

    Regularity is decided by membership of the generators Delta_2 g (+) 0 and
    0 (+) Delta_1 f (degree <= probe_deg) in the range of X, and re-decided at
    N_w + 1; a change raises TruncationUnstable.
    """
    tol = nm._tol(tol)
    if theta1.n != theta2.n or theta2.dim_in != theta1.dim_out:
        raise ValueError("factors are not composable")
    D = theta1.deg + theta2.deg
    N_w = D + probe_deg + 1 if N_w is None else N_w
    if N_w < D:
        raise ValueError("N_w below the total coefficient degree")
    probe_deg = min(probe_deg, N_w - D)
    theta, geom, geom1, geom2, X, Z, res, reg_res = _assemble(
        theta1, theta2, N_w, tol, probe_deg, cutoff)
    regular = reg_res <= tol.eq_tol
    details = {"ranks": (geom.rank, geom1.rank, geom2.rank)}
    if check_stability:
        nxt = _assemble(theta1, theta2, N_w + 1, tol, probe_deg, cutoff)
        if (nxt[-1] <= tol.eq_tol) != regular:
            raise TruncationUnstable(
                f"regularity changes between N_w={N_w} and {N_w + 1} "
                f"(residuals {reg_res:.2e}, {nxt[-1]:.2e})")
        details["ranks_next"] = (nxt[1].rank, nxt[2].rank, nxt[3].rank)
    return Factorization(theta, theta1, theta2, N_w, geom, geom1, geom2, X, Z, regular,
                         reg_res, res, probe_deg, details)


def regularity_shortcuts(f: Factorization, tol=None) -> dict:
    """Evaluate the shortcut rules for regularity and cross-check build_X.

    Rules: an inner left factor gives a regular factorization; for an inner
    product the factorization is regular iff both factors are inner; when the
    defect ranks are finite (stable under N_w -> N_w + 1) regularity is rank
    additivity.  A disagreement raises StructureViolation.
    """
    tol = nm._tol(tol)
    inner = {name: classify(op, tol=tol).inner
             for name, op in (("theta", f.theta), ("theta1", f.theta1), ("theta2", f.theta2))}
    out = {"regular": f.regular, "inner": inner, "applied": []}
    if inner["theta2"]:
        out["applied"].append("inner_factor2")
        if not f.regular:
            raise StructureViolation("inner Theta_2 but X not surjective")
    if inner["theta"]:
        out["applied"].append("inner_theta")
        expect = inner["theta1"] and inner["theta2"]
        if expect != f.regular:
            raise StructureViolation(
                f"inner product: regular={f.regular} but factors inner={expect}")
    nxt = f.details.get("ranks_next")
    if nxt is not None and tuple(nxt) == tuple(f.details["ranks"]):
        r, r1, r2 = f.details["ranks"]
        out["applied"].append("rank_rule")
        if (r == r1 + r2) != f.regular:
            raise StructureViolation(f"rank rule {r} vs {r1}+{r2} disagrees with regular={f.regular}")
    return out


@dataclass
class IntertwiningReport:
    residual: float             # max_i ||X C_i - diag(F_i, E_i) X|| on the shifted domain
    cuntz: dict                 # Cuntz flags of C (Theta), F (Theta_2) and E (Theta_1)


def intertwining_check(f: Factorization, tol=None) -> IntertwiningReport:
    """X C_i = diag(F_i, E_i) X with C, F, E the defect row isometries of
    Theta, Theta_2 and Theta_1, checked on inputs below the top degree."""
    tol = nm._tol(tol)
    iso = defect_row_isometry(f.theta, f.N_w, tol, f.geom)
    iso1 = defect_row_isometry(f.theta1, f.geom1.N_w, tol, f.geom1)
    iso2 = defect_row_isometry(f.theta2, f.N_w, tol, f.geom2)
    r1, r2 = f.geom1.rank, f.geom2.rank
    low = f.geom.dom.degree_mask(range(f.geom.dom.max_deg))
    worst = 0.0
    for i in range(f.theta.n):
        lhs = f.X @ iso.C[i] @ f.geom.Y[:, low] if f.geom.rank else np.zeros((r1 + r2, int(low.sum())))
        rhs = np.zeros_like(lhs)
        if r2:
            rhs[:r2] = iso2.C[i] @ f.Z[:r2, low]
        if r1:
            rhs[r2:] = iso1.C[i] @ f.Z[r2:, low]
        worst = max(worst, float(np.abs(lhs - rhs).max(initial=0.0)))
    return IntertwiningReport(worst, {"C": iso.is_cuntz, "F": iso2.is_cuntz, "E": iso1.is_cuntz})


@dataclass
class SubspacePair:
    model: Model
    H1: nm.Subspace             # in K_bold coordinates
    H2: nm.Subspace
    checks: dict

    def in_model(self, S: nm.Subspace) -> nm.Subspace:
        """Coordinates of a K_bold subspace with respect to the H_bold basis."""
        return nm.Subspace(nm.dagger(self.model.H_bold.basis) @ S.basis)


def subspaces_from_factorization(f: Factorization, tol=None) -> SubspacePair:
    """H1 = {Theta_2 u + X^*(Delta_2 u + g)} minus the graph of Theta, and
    H2 = [F^2 (x) E_* + X^*(Delta_2 coords + 0)] minus {Theta_2 u + X^*(Delta_2 u + 0)}."""
    tol = nm._tol(tol)
    if not f.regular:
        raise NotRegular("factorization is not regular at this truncation")
    mdl = model_from_theta(f.theta, f.N_w, tol, geom=f.geom)
    Hb = mdl.H_bold
    g2 = defect_geometry(f.theta2, f.N_w, tol, f.geom.cutoff)
    mo = f.geom.out.dim
    r, r2 = f.geom.rank, g2.rank
    Xs = nm.dagger(f.X)                  # (r2 + r1) -> r
    Xs2 = Xs[:, :r2]
    # H2: (x, X^* (u, 0)) with Theta_2^* x + Delta_2 u = 0 against every input of Theta_2
    cons = np.hstack([nm.dagger(g2.A_sq), g2.pair])
    ker = nm.kernel_basis(cons, tol, scale=1.0)
    lift = np.zeros((mo + r, mo + r2), dtype=complex)
    lift[:mo, :mo] = np.eye(mo)
    lift[mo:, mo:] = Xs2
    H2 = nm.orthonormalize(lift @ ker.basis, tol)
    # H1: span{(Theta_2 u, X^*(Delta_2 u, 0))} + span{(0, X^*(0, g))}, inside H_bold
    gen_u = np.vstack([g2.A_t, Xs2 @ g2.Y]) if r2 else np.vstack(
        [g2.A_t, np.zeros((r, g2.dom.dim), dtype=complex)])
    gen_g = np.vstack([np.zeros((mo, Xs.shape[1] - r2), dtype=complex), Xs[:, r2:]])
    M1 = nm.orthonormalize(np.hstack([gen_u, gen_g]), tol)
    H1 = nm.intersect(M1, Hb, tol)
    checks = {}
    c1 = nm.Subspace(nm.dagger(Hb.basis) @ H1.basis)
    checks["H1_invariance"] = invariance_residual(mdl.T, c1) if Hb.dim else 0.0
    checks["H2_in_H"] = nm.containment_residual(Hb, H2)
    alt = nm.complement(H1, within=Hb, tol=tol)
    checks["H2_complement_distance"] = nm.distance(alt, H2)
    checks["dims"] = (Hb.dim, H1.dim, H2.dim)
    return SubspacePair(mdl, H1, H2, checks)


def _fock_degree(ds, basis, tol) -> int:
    """Largest Fock degree carrying weight in vectors of the dilation space."""
    if ds.fock.dim == 0 or basis.shape[1] == 0:
        return 0
    tail = basis[ds.d:]
    weight = np.linalg.norm(tail, axis=1)
    deg = np.repeat(ds.fock.degrees, ds.fock.coeff_dim)
    hot = deg[weight > tol.eq_tol]
    return int(hot.max()) if hot.size else 0


def _wandering_of_G(ds, H1: nm.Subspace, tol):
    H2 = nm.complement(H1)
    E = ds.embed_H() @ H2.basis
    G = nm.complement(nm.Subspace(E)) if E.shape[1] else nm.Subspace.full(ds.dim)
    moved = np.hstack([v @ G.basis for v in ds.V])
    VG = nm.range_basis(moved, tol, scale=1.0)
    return G, nm.complement(VG, within=G, tol=tol)


@dataclass
class SubspaceFactorization:
    factorization: Factorization
    dilation: object
    Q: nm.Subspace
    theta_L: MultiAnalyticOp
    product_residual: float
    valid_degree: int
    checks: dict


def factorization_from_subspace(T, H1: nm.Subspace, N: int | None = None, tol=None,
                                N_w: int | None = None) -> SubspaceFactorization:
    """Regular factorization Theta_L = Psi_2 Psi_1 attached to a joint invariant
    subspace H1, read from the Wold decomposition of V restricted to
    G = K minus (H minus H1)."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    d = mats[0].shape[0]
    if H1.ambient_dim != d:
        raise ValueError("subspace ambient dimension differs from the tuple")
    inv = invariance_residual(mats, H1)
    if inv > tol.eq_tol:
        raise NotInvariant(f"T_i H1 leaves H1 (residual {inv:.2e})")
    if compute_Hc(mats, tol).dim:
        raise NotCNC("tuple has a nonzero coisometric part")
    m = charfn_degree(mats, tol=tol)
    need = m if m is not None else 8
    adaptive = N is None
    N = need + 2 if adaptive else N
    while True:
        ds = build_dilation(mats, N, tol)
        G, Q = _wandering_of_G(ds, H1, tol)
        q_deg = _fock_degree(ds, Q.basis, tol)
        valid = N - 1 - q_deg
        if valid >= need or not adaptive or N >= need + 6:
            break
        N += 1
    ds_next = build_dilation(mats, N + 1, tol, verify=False)
    _, Q_next = _wandering_of_G(ds_next, H1, tol)
    if Q_next.dim != Q.dim:
        raise TruncationUnstable(f"wandering dimension {Q.dim} at N={N} vs {Q_next.dim} at N={N + 1}")
    if valid < need:
        raise TruncationUnstable(f"only degrees <= {valid} are exact; increase N")
    fourier_representation(ds.V, Q, valid, tol)
    Lb, Lsb, Qb = ds.L_basis, ds.L_star_basis, Q.basis
    mq = words_applied(ds.V, Qb, valid)
    ml = words_applied(ds.V, Lsb, valid)
    psi1 = MultiAnalyticOp(ds.n, Lb.shape[1], Qb.shape[1],
                           {t[::-1]: nm.dagger(v) @ Lb for t, v in mq.items()}, deg=valid)
    psi2 = MultiAnalyticOp(ds.n, Qb.shape[1], Lsb.shape[1],
                           {t[::-1]: nm.dagger(v) @ Qb for t, v in ml.items()}, deg=valid)
    theta_L = char_fn_geometric(ds, valid, tol)
    atol = tol.eq_tol * 1e-2
    psi1, psi2, theta_L = psi1.trim(atol), psi2.trim(atol), theta_L.trim(atol)
    prod = multiply(psi2, psi1)
    prod_res = coefficient_distance(prod.truncate(valid),
                                    MultiAnalyticOp(ds.n, theta_L.dim_in, theta_L.dim_out,
                                                    theta_L.coeffs, deg=max(theta_L.deg, 0)))
    tail = max((nm.opnorm(v) for k, v in prod.coeffs.items() if len(k) > valid), default=0.0)
    prod_res = max(prod_res, tail)
    Nw = psi1.deg + psi2.deg + 2 if N_w is None else N_w
    fac = build_X(psi1, psi2, Nw, tol)
    checks = {"wandering_dim": Q.dim, "q_degree": q_deg, "dilation": ds.checks,
              "regular": fac.regular, "X_isometry": fac.isometry_residual}
    return SubspaceFactorization(fac, ds, Q, theta_L, prod_res, valid, checks)


def _is_unitary_constant(op, tol):
    if op.dim_in != op.dim_out:
        return False
    return classify(op, tol=tol, outer_dim_limit=0).unitary_constant


@dataclass
class RoundTrip:
    distance: float
    product_residual: float
    nontrivial_subspace: bool
    nontrivial_factorization: bool
    subspaces: SubspacePair
    built: SubspaceFactorization


def subspace_round_trip(T, H1: nm.Subspace, N: int | None = None, tol=None) -> RoundTrip:
    """Subspace -> factorization -> subspace, compared through the embedding
    h -> (V_alpha L_*)^H h of H into the model."""
    tol = tol_of(T, tol)
    mats = mats_of(T)
    built = factorization_from_subspace(mats, H1, N, tol)
    fac = built.factorization
    subs = subspaces_from_factorization(fac, tol)
    ds = built.dilation
    Nw = fac.N_w
    if Nw > ds.N - 1:
        ds = build_dilation(mats, Nw + 1, tol, verify=False)
    moved = words_applied(ds.V, ds.L_star_basis, Nw)
    space = subs.model.space.geom.out
    emb = np.zeros((space.dim, ds.d), dtype=complex)
    for t in space.letters:
        emb[space.slot(t)] = nm.dagger(moved[t])[:, : ds.d]
    Q = subs.model.H_bold.basis
    mo = space.dim
    lift = Q @ (np.linalg.pinv(Q[:mo], rcond=1e-10) @ emb)
    image = nm.range_basis(lift @ H1.basis, tol, scale=1.0) if H1.dim else nm.Subspace.zero(Q.shape[0])
    dist = nm.distance(image, subs.H1)
    d = ds.d
    nontriv_sub = 0 < H1.dim < d
    nontriv_fac = not (_is_unitary_constant(fac.theta1, tol) or _is_unitary_constant(fac.theta2, tol))
    return RoundTrip(dist, built.product_residual, nontriv_sub, nontriv_fac, subs, built)


@dataclass
class TriangulationReport:
    A: list
    B: list
    A_coincides: bool
    B_coincides: bool
    residuals: dict
    nontrivial_subspace: bool
    nontrivial_factorization: bool


def _block_vs_pure(blocks, op, tol):
    parts = pure_unitary_decomposition(op, tol)
    pure = parts.pure
    if not blocks or blocks[0].shape[0] == 0:
        ok = pure.dim_in == 0 and pure.dim_out == 0
        return ok, 0.0 if ok else float("inf")
    cf = char_fn(blocks, op.deg + 1, tol)
    res = coincides(cf, pure, tol)
    return res.coincide, res.residual


def factor_triangulation_check(f: Factorization, tol=None) -> TriangulationReport:
    """Characteristic functions of the diagonal blocks of the model against the
    purely contractive parts of the two factors."""
    tol = nm._tol(tol)
    subs = subspaces_from_factorization(f, tol)
    mdl = subs.model
    Hb = mdl.H_bold
    c1 = nm.dagger(Hb.basis) @ subs.H1.basis
    c2 = nm.dagger(Hb.basis) @ subs.H2.basis
    A = [nm.dagger(c1) @ t @ c1 for t in mdl.T]
    B = [nm.dagger(c2) @ t @ c2 for t in mdl.T]
    okA, resA = _block_vs_pure(A, f.theta1, tol)
    okB, resB = _block_vs_pure(B, f.theta2, tol)
    nontriv_sub = 0 < subs.H1.dim < Hb.dim
    nontriv_fac = not (_is_unitary_constant(f.theta1, tol) or _is_unitary_constant(f.theta2, tol))
    if nontriv_sub != nontriv_fac:
        raise StructureViolation(
            f"subspace nontrivial={nontriv_sub} but factorization nontrivial={nontriv_fac}")
    return TriangulationReport(A, B, okA, okB, {"A": resA, "B": resB, **subs.checks},
                               nontriv_sub, nontriv_fac)


def solve_left_factor(target: MultiAnalyticOp, right: MultiAnalyticOp,
                      deg: int | None = None) -> tuple:
    """Least-squares Psi with target = Psi right; returns (Psi, residual)."""
    if target.n != right.n or target.dim_in != right.dim_in:
        raise ValueError("incompatible operators")
    n = target.n
    deg = target.deg if deg is None else deg
    F, Fp, E = right.dim_out, target.dim_out, right.dim_in
    alphas = W.letter_tuples(n, deg)
    gammas = W.letter_tuples(n, deg + right.deg)
    gidx = {g: j for j, g in enumerate(gammas)}
    M = np.zeros((len(alphas) * F, len(gammas) * E), dtype=complex)
    for a_i, a in enumerate(alphas):
        for b, rb in right.coeffs.items():
            j = gidx.get(a + b)
            if j is not None:
                M[a_i * F:(a_i + 1) * F, j * E:(j + 1) * E] += rb
    rhs = np.zeros((Fp, len(gammas) * E), dtype=complex)
    for g, tg in target.coeffs.items():
        if g in gidx:
            rhs[:, gidx[g] * E:(gidx[g] + 1) * E] = tg
    sol = nm.solve_lstsq(M.T, rhs.T).T
    coeffs = {a: sol[:, a_i * F:(a_i + 1) * F] for a_i, a in enumerate(alphas)}
    psi = MultiAnalyticOp(n, F, Fp, coeffs, deg=deg)
    res = float(np.abs(sol @ M - rhs).max(initial=0.0))
    return psi, res


def _unitary_completion(psi, right, tol):
    """Psi is only determined on the range of ``right``; if it is a constant
    isometric there, extend it to a unitary constant, else return None."""
    if psi.dim_in != psi.dim_out or any(k and np.abs(v).max() > tol.eq_tol
                                        for k, v in psi.coeffs.items()):
        return None
    p0 = psi.coeff(())
    cols = [v for v in right.coeffs.values()]
    R = nm.range_basis(np.hstack(cols), tol, scale=1.0) if cols else nm.Subspace.zero(psi.dim_in)
    img = p0 @ R.basis
    if np.abs(nm.dagger(img) @ img - np.eye(R.dim)).max(initial=0.0) > tol.eq_tol:
        return None
    S = nm.Subspace(img) if R.dim else nm.Subspace.zero(psi.dim_out)
    full = img @ nm.dagger(R.basis) + nm.complement(S).basis @ nm.dagger(nm.complement(R).basis)
    return MultiAnalyticOp.constant(psi.n, full)


@dataclass
class Comparison:
    relation: str               # "equal", "contained" (H1 in H1') or "contains" (H1' in H1)
    psi: MultiAnalyticOp
    residual: float
    psi_unitary_constant: bool


def compare_factorizations(f: Factorization, g: Factorization, tol=None) -> Comparison:
    """If H1 is inside H1' then Theta_1' = Psi Theta_1; if equal, Psi is a
    unitary constant.  The reverse containment gives Theta_1 = Psi Theta_1'."""
    tol = nm._tol(tol)
    if f.N_w != g.N_w:
        raise ValueError("factorizations must share the working degree")
    sf = subspaces_from_factorization(f, tol)
    sg = subspaces_from_factorization(g, tol)
    fwd = nm.contains(sg.H1, sf.H1, tol)
    bwd = nm.contains(sf.H1, sg.H1, tol)
    if not (fwd or bwd):
        raise NotComparable("neither invariant subspace contains the other")
    if fwd:
        psi, res = solve_left_factor(g.theta1, f.theta1)
    else:
        psi, res = solve_left_factor(f.theta1, g.theta1)
    psi = psi.trim(tol.eq_tol * 1e-2)
    if res > tol.eq_tol:
        raise NotComparable(f"no multi-analytic Psi found (residual {res:.2e})")
    relation = "equal" if (fwd and bwd) else ("contained" if fwd else "contains")
    if relation == "equal":
        psi = _unitary_completion(psi, f.theta1, tol)
        if psi is None:
            raise StructureViolation("equal subspaces but Psi is not a unitary constant")
    uc = _is_unitary_constant(psi, tol)
    if relation == "equal":
        # Theta_1' = Psi Theta_1 with Psi a unitary constant: the factors coincide
        res = max(res, coefficient_distance(multiply(psi, f.theta1), g.theta1))
        if not uc or res > tol.eq_tol:
            raise StructureViolation("equal subspaces but Theta_1 factors do not coincide")
    return Comparison(relation, psi, res, uc)


@dataclass
class InnerOuterSplit:
    H0: nm.Subspace
    H1: nm.Subspace
    distance: float
    reference: object
    factorization: Factorization


def c0_c1_from_inner_outer(T, deg: int | None = None, N_w: int | None = None,
                           tol=None, horizon: int = 200) -> InnerOuterSplit:
    """Split H from the inner-outer factorization of Theta_T and compare it with
    H_0 = ker lim Phi^k(I).

    With Theta_T = Theta_inner Theta_outer, H_0 is the set of h whose Poisson
    image lies in the co-invariant part H2 with full norm.
    """
    tol = tol_of(T, tol)
    mats = mats_of(T)
    d = mats[0].shape[0]
    if deg is None:
        deg = charfn_degree(mats, tol=tol)
        if deg is None:
            raise TruncationUnstable("characteristic function has no finite degree here")
        deg = max(deg, 1)
    theta = char_fn(mats, deg, tol).trim(tol.eq_tol * 1e-2, keep_deg=True)
    io = inner_outer_factorize(theta, deg + 2, tol)
    fac = build_X(io.outer, io.inner, N_w, tol)
    subs = subspaces_from_factorization(fac, tol)
    space = subs.model.space.geom.out
    kern = poisson_kernel(mats, space.max_deg, tol)
    ext = np.zeros((subs.model.space.K_dim, d), dtype=complex)
    ext[: space.dim] = kern
    gram = nm.hermitize(nm.dagger(ext) @ subs.H2.projector() @ ext)
    w, v = np.linalg.eigh(gram)
    H0 = nm.orthonormalize(v[:, w >= 1 - np.sqrt(tol.eq_tol)], tol) if d else nm.Subspace.zero(0)
    H1 = nm.complement(H0)
    ref = triangulate_c0_c1(mats, horizon, tol)
    return InnerOuterSplit(H0, H1, nm.distance(H0, ref.first), ref, fac)
