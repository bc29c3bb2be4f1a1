"""Multi-analytic operators stored as truncated Fourier coefficient families.

``coeffs[alpha]`` is the coefficient of R_alpha in the formal expansion
sum_alpha R_alpha (x) theta_(alpha).  Since R_alpha e_gamma = e_{gamma reversed(alpha)},
the symbol (the image of 1 (x) k) has component theta_(reversed(alpha)) k at e_alpha.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import numerics as nm
from . import words as W
from .errors import RankUnstable, Undetermined
from .fockspace import TruncatedFock, creation_matrix


def _key(w):
    if isinstance(w, W.Word):
        return w.letters
    return tuple(int(x) for x in w)


class MultiAnalyticOp:
    """Operator F^2 (x) E -> F^2 (x) E_* given by coefficients theta_(alpha), |alpha| <= deg."""

    def __init__(self, n: int, dim_in: int, dim_out: int, coeffs: dict, deg: int | None = None):
        self.n = int(n)
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out)
        store = {}
        for w, mat in coeffs.items():
            key = _key(w)
            if any(not 1 <= x <= self.n for x in key):
                raise ValueError(f"word {key} outside alphabet 1..{self.n}")
            mat = np.asarray(mat, dtype=complex).reshape(self.dim_out, self.dim_in)
            if not np.all(np.isfinite(mat)):
                raise ValueError("non-finite coefficient")
            store[key] = mat
        self.coeffs = store
        top = max((len(k) for k in store), default=0)
        self.deg = top if deg is None else int(deg)
        if self.deg < top:
            raise ValueError("deg below the longest stored word")

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, n, mat):
        mat = np.atleast_2d(np.asarray(mat, dtype=complex))
        return cls(n, mat.shape[1], mat.shape[0], {(): mat}, deg=0)

    @classmethod
    def zero(cls, n, dim_in, dim_out):
        return cls(n, dim_in, dim_out, {}, deg=0)

    def coeff(self, w) -> np.ndarray:
        key = _key(w)
        got = self.coeffs.get(key)
        if got is None:
            return np.zeros((self.dim_out, self.dim_in), dtype=complex)
        return got

    def items(self):
        return sorted(self.coeffs.items(), key=lambda kv: (len(kv[0]), kv[0]))

    def trim(self, atol: float = 0.0, keep_deg: bool = False) -> "MultiAnalyticOp":
        """Drop coefficients with max-abs <= atol."""
        kept = {k: v for k, v in self.coeffs.items() if np.abs(v).max(initial=0.0) > atol}
        return MultiAnalyticOp(self.n, self.dim_in, self.dim_out, kept,
                               deg=self.deg if keep_deg else None)

    def truncate(self, deg: int) -> "MultiAnalyticOp":
        kept = {k: v for k, v in self.coeffs.items() if len(k) <= deg}
        return MultiAnalyticOp(self.n, self.dim_in, self.dim_out, kept, deg=min(deg, self.deg))

    def adjoint_constant(self) -> "MultiAnalyticOp":
        if self.deg != 0:
            raise ValueError("only constant operators have multi-analytic adjoints")
        return MultiAnalyticOp.constant(self.n, nm.dagger(self.coeff(())))

    def compress(self, left: np.ndarray, right: np.ndarray) -> "MultiAnalyticOp":
        """Coefficients left^H theta right (restriction to coefficient subspaces)."""
        left = np.asarray(left, dtype=complex)
        right = np.asarray(right, dtype=complex)
        new = {k: nm.dagger(left) @ v @ right for k, v in self.coeffs.items()}
        return MultiAnalyticOp(self.n, right.shape[1], left.shape[1], new, deg=self.deg)

    # symbol ---------------------------------------------------------------
    def symbol_blocks(self) -> list:
        """Per degree k an array (n^k, dim_out, dim_in); entry j is the symbol
        component at the j-th length-k word, i.e. theta_(reversed word)."""
        out = []
        for k in range(self.deg + 1):
            arr = np.zeros((self.n ** k, self.dim_out, self.dim_in), dtype=complex)
            out.append(arr)
        off = [W.degree_offset(self.n, k) for k in range(self.deg + 1)]
        idx = W.word_index(self.n, self.deg)
        for key, mat in self.coeffs.items():
            k = len(key)
            out[k][idx[key[::-1]] - off[k]] = mat
        return out

    def symbol(self, k: np.ndarray, N_w: int | None = None) -> np.ndarray:
        """Fock vector of op(1 (x) k) on F^2_{<=N_w} (x) E_*."""
        N_w = self.deg if N_w is None else N_w
        space = TruncatedFock(self.n, N_w, self.dim_out)
        out = np.zeros(space.dim, dtype=complex)
        k = np.asarray(k, dtype=complex).reshape(self.dim_in)
        for key, mat in self.coeffs.items():
            if len(key) <= N_w:
                out[space.slot(key[::-1])] += mat @ k
        return out

    def symbol_gram(self) -> np.ndarray:
        """sum_alpha theta_(alpha)^H theta_(alpha): Gram of the columns 1 (x) k."""
        g = np.zeros((self.dim_in, self.dim_in), dtype=complex)
        for mat in self.coeffs.values():
            g += nm.dagger(mat) @ mat
        return g

    def shifted_grams(self) -> list:
        """For each shift length m a stack over words mu of
        sum_beta sym[mu beta]^H sym[beta] = <op 1(x)k', S_mu op 1(x)k>."""
        blocks = self.symbol_blocks()
        out = []
        for m in range(self.deg + 1):
            acc = np.zeros((self.n ** m, self.dim_in, self.dim_in), dtype=complex)
            for j in range(self.deg + 1 - m):
                big = blocks[m + j].reshape(self.n ** m, self.n ** j, self.dim_out, self.dim_in)
                acc += np.einsum("mbji,bjk->mik", np.conj(big), blocks[j])
            out.append(acc)
        return out

    def to_matrix(self, N_w: int, N_in: int | None = None) -> np.ndarray:
        return to_matrix(self, N_w, N_in)

    def __repr__(self):
        return (f"MultiAnalyticOp(n={self.n}, dim_in={self.dim_in}, dim_out={self.dim_out}, "
                f"deg={self.deg}, terms={len(self.coeffs)})")

    def dump(self) -> list:
        """Coefficient dump: one record per word (row-major [re, im] pairs)."""
        recs = []
        for key, mat in self.items():
            recs.append({
                "word": str(W.Word(key, self.n)),
                "rows": self.dim_out,
                "cols": self.dim_in,
                "entries": [[float(z.real), float(z.imag)] for z in mat.reshape(-1)],
            })
        return recs

    @classmethod
    def from_dump(cls, n, dim_in, dim_out, recs, deg=None):
        coeffs = {}
        for r in recs:
            vals = np.array([complex(a, b) for a, b in r["entries"]]).reshape(dim_out, dim_in)
            coeffs[W.Word.parse(r["word"], n).letters] = vals
        return cls(n, dim_in, dim_out, coeffs, deg=deg)


@lru_cache(maxsize=4096)
def _shift_targets(n, N_in, N_w, key):
    """For every input word gamma of degree <= N_in: index of gamma + reversed(key)."""
    tail = key[::-1]
    idx_out = W.word_index(n, N_w)
    src, tgt = [], []
    for j, g in enumerate(W.letter_tuples(n, N_in)):
        if len(g) + len(tail) <= N_w:
            src.append(j)
            tgt.append(idx_out[g + tail])
    return np.array(src, dtype=int), np.array(tgt, dtype=int)


def to_matrix(op: MultiAnalyticOp, N_w: int, N_in: int | None = None) -> np.ndarray:
    """Matrix from F^2_{<=N_in} (x) E to F^2_{<=N_w} (x) E_* (N_in defaults to N_w).

    Block (gamma reversed(alpha), gamma) equals theta_(alpha); everything pushed
    beyond degree N_w is dropped.
    """
    if N_w < 0:
        raise ValueError("N_w must be >= 0")
    N_in = N_w if N_in is None else N_in
    out_sp = TruncatedFock(op.n, N_w, op.dim_out)
    in_sp = TruncatedFock(op.n, N_in, op.dim_in)
    a4 = np.zeros((out_sp.num_words, op.dim_out, in_sp.num_words, op.dim_in), dtype=complex)
    for key, mat in op.coeffs.items():
        if len(key) > N_w:
            continue
        src, tgt = _shift_targets(op.n, N_in, N_w, key)
        if src.size:
            a4[tgt, :, src, :] += mat
    return a4.reshape(out_sp.dim, in_sp.dim)


def exact_matrix(op: MultiAnalyticOp, N_w: int) -> np.ndarray:
    """Compression to inputs of degree <= N_w - deg, where no output is truncated."""
    if N_w < op.deg:
        raise ValueError("N_w below the coefficient degree")
    return to_matrix(op, N_w, N_w - op.deg)


def intertwining_defect(op: MultiAnalyticOp, N_w: int) -> float:
    """max_i ||(A S_i - S_i A) P_{deg <= N_w-1-D}||."""
    if N_w < 1:
        raise ValueError("N_w must be >= 1")
    keep = N_w - 1 - op.deg
    if keep < 0:
        return 0.0
    # only inputs of degree <= keep + 1 enter, so build just those columns and
    # let S_i act on output rows as the word map w -> i w
    n = op.n
    small = TruncatedFock(n, keep + 1, op.dim_in)
    a = to_matrix(op, N_w, keep + 1)
    cols = small.degree_mask(range(keep + 1))
    words = W.letter_tuples(n, N_w - 1)
    idx_out = W.word_index(n, N_w)
    src = np.array([idx_out[w] for w in words], dtype=int)
    a4 = a[:, cols].reshape(-1, op.dim_out, int(cols.sum()))
    worst = 0.0
    for i in range(1, n + 1):
        lhs = (a @ creation_matrix(small, i))[:, cols].reshape(a4.shape)
        rhs = np.zeros_like(a4)
        rhs[[idx_out[(i,) + w] for w in words]] = a4[src]
        worst = max(worst, nm.opnorm((lhs - rhs).reshape(-1, a4.shape[2])))
    return worst


def matrix_intertwining_defect(a: np.ndarray, n: int, N_w: int, dim_in: int, dim_out: int,
                               keep: int) -> float:
    """Same test for an arbitrary matrix on F^2_{<=N_w}, on inputs of degree <= keep."""
    if keep < 0:
        return 0.0
    in_sp = TruncatedFock(n, N_w, dim_in)
    out_sp = TruncatedFock(n, N_w, dim_out)
    mask = in_sp.degree_mask(range(keep + 1))
    worst = 0.0
    for i in range(1, n + 1):
        d = (a @ creation_matrix(in_sp, i) - creation_matrix(out_sp, i) @ a)[:, mask]
        worst = max(worst, nm.opnorm(d))
    return worst


def multiply(a: MultiAnalyticOp, b: MultiAnalyticOp) -> MultiAnalyticOp:
    """a o b (b first): c_gamma = sum over gamma = alpha beta of a_alpha b_beta."""
    if a.n != b.n:
        raise ValueError("alphabet mismatch")
    if b.dim_out != a.dim_in:
        raise ValueError(f"dimension mismatch {b.dim_out} vs {a.dim_in}")
    out = {}
    for ka, ma in a.coeffs.items():
        for kb, mb in b.coeffs.items():
            key = ka + kb
            prod = ma @ mb
            if key in out:
                out[key] = out[key] + prod
            else:
                out[key] = prod
    return MultiAnalyticOp(a.n, b.dim_in, a.dim_out, out, deg=a.deg + b.deg)


def add(a: MultiAnalyticOp, b: MultiAnalyticOp, scale_b: complex = 1.0) -> MultiAnalyticOp:
    if (a.n, a.dim_in, a.dim_out) != (b.n, b.dim_in, b.dim_out):
        raise ValueError("shape mismatch")
    out = dict(a.coeffs)
    for k, v in b.coeffs.items():
        out[k] = out.get(k, 0) + scale_b * v
    return MultiAnalyticOp(a.n, a.dim_in, a.dim_out, out, deg=max(a.deg, b.deg))


def direct_sum(a: MultiAnalyticOp, b: MultiAnalyticOp) -> MultiAnalyticOp:
    if a.n != b.n:
        raise ValueError("alphabet mismatch")
    out = {}
    for k in set(a.coeffs) | set(b.coeffs):
        m = np.zeros((a.dim_out + b.dim_out, a.dim_in + b.dim_in), dtype=complex)
        m[: a.dim_out, : a.dim_in] = a.coeff(k)
        m[a.dim_out:, a.dim_in:] = b.coeff(k)
        out[k] = m
    return MultiAnalyticOp(a.n, a.dim_in + b.dim_in, a.dim_out + b.dim_out, out,
                           deg=max(a.deg, b.deg))


def coefficient_distance(a: MultiAnalyticOp, b: MultiAnalyticOp) -> float:
    """max over words of ||a_alpha - b_alpha||."""
    if (a.n, a.dim_in, a.dim_out) != (b.n, b.dim_in, b.dim_out):
        raise ValueError("shape mismatch")
    worst = 0.0
    for k in set(a.coeffs) | set(b.coeffs):
        worst = max(worst, nm.opnorm(a.coeff(k) - b.coeff(k)))
    return worst


# classification -----------------------------------------------------------

def isometry_defect(op: MultiAnalyticOp) -> float:
    """Largest deviation of the exactly represented columns from orthonormality.

    Columns for inputs of degree <= N_w - deg are shifts S_gamma of the symbol
    columns, so their Gram matrix is determined by the shifted symbol Grams.
    """
    if op.dim_in == 0:
        return 0.0
    grams = op.shifted_grams()
    worst = nm.opnorm(grams[0][0] - np.eye(op.dim_in))
    for m in range(1, len(grams)):
        if grams[m].size:
            worst = max(worst, float(np.abs(grams[m]).max()))
    return worst


def isometry_defect_matrix(op: MultiAnalyticOp, N_w: int) -> float:
    """Same quantity computed from to_matrix columns directly."""
    if op.dim_in == 0:
        return 0.0
    a = exact_matrix(op, N_w)
    return float(np.abs(nm.dagger(a) @ a - np.eye(a.shape[1])).max())


def outer_residual(op: MultiAnalyticOp, N_w: int, margin: int = 1, tol=None) -> float:
    """Distance of the low-degree output basis vectors from the exact range."""
    top = N_w - op.deg - margin
    if top < 0:
        raise ValueError("N_w too small for the requested margin")
    if op.dim_out == 0:
        return 0.0
    a = exact_matrix(op, N_w)
    rng = nm.range_basis(a, tol, scale=1.0)
    out_sp = TruncatedFock(op.n, N_w, op.dim_out)
    mask = out_sp.degree_mask(range(top + 1))
    targets = np.eye(out_sp.dim, dtype=complex)[:, mask]
    resid = targets - rng.basis @ (nm.dagger(rng.basis) @ targets)
    return float(np.linalg.norm(resid, axis=0).max()) if resid.size else 0.0


@dataclass
class Classification:
    inner: bool
    outer: bool | None
    purely_contractive: bool
    unitary_constant: bool
    margin: int
    residuals: dict = field(default_factory=dict)

    def as_dict(self):
        return {"inner": self.inner, "outer": self.outer,
                "purely_contractive": self.purely_contractive,
                "unitary_constant": self.unitary_constant, "margin": self.margin,
                "residuals": self.residuals}


def classify(op: MultiAnalyticOp, N_w: int | None = None, tol=None, margin: int = 1,
             outer_dim_limit: int = 4000) -> Classification:
    """Inner / outer / purely contractive / unitary constant flags at truncation."""
    tol = nm._tol(tol)
    N_w = op.deg + margin + 1 if N_w is None else N_w
    iso = isometry_defect(op)
    inner = iso <= tol.eq_tol
    outer = None
    out_res = None
    if N_w - op.deg - margin >= 0:
        size = TruncatedFock(op.n, N_w, max(op.dim_out, op.dim_in, 1)).dim
        if size <= outer_dim_limit:
            out_res = outer_residual(op, N_w, margin, tol)
            outer = out_res <= tol.eq_tol
    th0 = op.coeff(())
    smax = nm.opnorm(th0)
    purely = smax < 1 - tol.eq_tol if min(th0.shape) > 0 else True
    higher = max((nm.opnorm(v) for k, v in op.coeffs.items() if k), default=0.0)
    uc = (op.dim_in == op.dim_out and higher <= tol.eq_tol and
          (op.dim_in == 0 or nm.opnorm(nm.dagger(th0) @ th0 - np.eye(op.dim_in)) <= tol.eq_tol))
    return Classification(inner, outer, purely, uc, margin,
                          {"isometry": iso, "outer": out_res, "sigma_max_0": smax,
                           "higher": higher})


# pure / unitary-constant splitting ------------------------------------

@dataclass
class PureUnitaryParts:
    E_u: nm.Subspace
    E_star_u: nm.Subspace
    W: np.ndarray
    E_0: nm.Subspace
    E_star_0: nm.Subspace
    pure: MultiAnalyticOp
    iterations: int


def pure_unitary_decomposition(op: MultiAnalyticOp, tol=None) -> PureUnitaryParts:
    """Split off the largest unitary-constant summand I (x) W."""
    tol = nm._tol(tol)
    th0 = op.coeff(())
    higher = [v for k, v in op.coeffs.items() if k]
    rows = [np.eye(op.dim_in) - nm.dagger(th0) @ th0] + higher
    cur = nm.kernel_basis(np.vstack(rows) if rows else np.zeros((0, op.dim_in)), tol, scale=1.0)
    # adjoint conditions: theta_alpha^H kills theta_0 E_u for |alpha| >= 1
    adj = np.vstack([nm.dagger(v) for v in higher]) if higher else np.zeros((0, op.dim_out))
    it = 0
    for it in range(1, op.dim_in + 2):
        if cur.dim == 0 or adj.shape[0] == 0:
            break
        bad = adj @ th0 @ cur.basis
        keep = nm.kernel_basis(bad, tol, scale=1.0)
        if keep.dim == cur.dim:
            break
        cur = nm.orthonormalize(cur.basis @ keep.basis, tol)
    E_u = cur
    E_su = nm.range_basis(th0 @ E_u.basis, tol, scale=1.0) if E_u.dim else nm.Subspace.zero(op.dim_out)
    Wm = nm.dagger(E_su.basis) @ th0 @ E_u.basis
    E_0 = nm.complement(E_u)
    E_s0 = nm.complement(E_su)
    pure = op.compress(E_s0.basis, E_0.basis)
    return PureUnitaryParts(E_u, E_su, Wm, E_0, E_s0, pure, it)


# coincidence ----------------------------------------------------------------

@dataclass
class Coincidence:
    coincide: bool
    W: np.ndarray | None
    W_star: np.ndarray | None
    residual: float


def _pair_residual(a, b, Wm, Ws, keys):
    worst = 0.0
    for k in keys:
        worst = max(worst, nm.opnorm(Ws @ a.coeff(k) - b.coeff(k) @ Wm))
    return worst


def coincides(a: MultiAnalyticOp, b: MultiAnalyticOp, tol=None, seed: int = 0) -> Coincidence:
    """Search unitaries W, W_* with W_* a_alpha = b_alpha W for every alpha.

    Raises Undetermined when intertwiners exist but no unitary pair could be
    isolated.
    """
    tol = nm._tol(tol)
    if a.n != b.n:
        raise ValueError("alphabet mismatch")
    if a.dim_in != b.dim_in or a.dim_out != b.dim_out:
        return Coincidence(False, None, None, float("inf"))
    p, q = a.dim_in, a.dim_out
    keys = sorted(set(a.coeffs) | set(b.coeffs), key=lambda k: (len(k), k))
    if p == 0 or q == 0:
        return Coincidence(True, np.eye(p, dtype=complex), np.eye(q, dtype=complex), 0.0)
    # linear map (W, W_*) -> (W_* a_k - b_k W)_k ; vec is column-major
    nvar = p * p + q * q
    normal = np.zeros((nvar, nvar), dtype=complex)
    eye_p, eye_q = np.eye(p), np.eye(q)
    for k in keys:
        ak, bk = a.coeff(k), b.coeff(k)
        blk = np.hstack([-np.kron(eye_p, bk), np.kron(ak.T, eye_q)])
        normal += nm.dagger(blk) @ blk
    w, v = np.linalg.eigh(nm.hermitize(normal))
    scale = max(1.0, w.max())
    null = v[:, w <= max(tol.eq_tol ** 2, 1e-24) * scale * nvar]
    if null.shape[1] == 0:
        return Coincidence(False, None, None, float(np.sqrt(max(w.min(), 0.0))))
    rng = np.random.default_rng(seed)
    cands = [null[:, j] for j in range(null.shape[1])]
    cands.append(null @ (rng.standard_normal(null.shape[1]) + 1j * rng.standard_normal(null.shape[1])))
    best = (np.inf, None, None)
    any_invertible = False
    for c in cands:
        Wm = c[: p * p].reshape(p, p, order="F")
        Ws = c[p * p:].reshape(q, q, order="F")
        sv_w = np.linalg.svd(Wm, compute_uv=False)
        sv_s = np.linalg.svd(Ws, compute_uv=False)
        if sv_w[-1] > 1e-8 * sv_w[0] and sv_s[-1] > 1e-8 * sv_s[0]:
            any_invertible = True
        Wu, Su = nm.polar_unitary(Wm), nm.polar_unitary(Ws)
        for _ in range(30):
            res = _pair_residual(a, b, Wu, Su, keys)
            if res < best[0]:
                best = (res, Wu, Su)
            if res <= tol.eq_tol:
                break
            # alternating Procrustes refinement
            A = np.hstack([a.coeff(k) for k in keys])
            B = np.hstack([b.coeff(k) @ Wu for k in keys])
            try:
                Su = nm.align_unitary(A, B, tol)
            except Undetermined:
                pass
            Bv = np.vstack([b.coeff(k) for k in keys])
            Cv = np.vstack([Su @ a.coeff(k) for k in keys])
            Wu = nm.polar_unitary(nm.dagger(Bv) @ Cv)
        if best[0] <= tol.eq_tol:
            break
    if best[0] <= tol.eq_tol:
        return Coincidence(True, best[1], best[2], best[0])
    if any_invertible:
        raise Undetermined(f"intertwiners exist but unitary search stalled (residual {best[0]:.2e})")
    return Coincidence(False, None, None, best[0])


# inner-outer ----------------------------------------------------------------

@dataclass
class InnerOuter:
    inner: MultiAnalyticOp
    outer: MultiAnalyticOp
    wandering_dim: int
    product_residual: float
    inner_defect: float
    outer_residual: float | None
    N_w: int


def _wandering_of_range(op, N_w, tol):
    a = exact_matrix(op, N_w)
    in_sp = TruncatedFock(op.n, N_w - op.deg, op.dim_in)
    rng = nm.range_basis(a, tol, scale=1.0)
    shifted_cols = in_sp.degree_mask(range(1, N_w - op.deg + 1))
    sh = nm.range_basis(a[:, shifted_cols], tol, scale=1.0)
    return nm.complement(sh, within=rng, tol=tol)


def inner_outer_factorize(op: MultiAnalyticOp, N_w: int | None = None, tol=None,
                          check_stability: bool = True) -> InnerOuter:
    """op = inner o outer with the inner factor read off the wandering
    subspace of the range of op."""
    tol = nm._tol(tol)
    N_w = op.deg + 2 if N_w is None else N_w
    if N_w < op.deg + 1:
        raise ValueError("N_w must exceed the coefficient degree")
    wand = _wandering_of_range(op, N_w, tol)
    if check_stability and N_w - 1 >= op.deg + 1:
        prev = _wandering_of_range(op, N_w - 1, tol)
        if prev.dim != wand.dim:
            raise RankUnstable(f"wandering dimension {prev.dim} at N={N_w - 1} vs {wand.dim} at N={N_w}")
    out_sp = TruncatedFock(op.n, N_w, op.dim_out)
    r = wand.dim
    # inner factor: 1 (x) e_j -> j-th wandering vector
    coeffs_i = {}
    for t in out_sp.letters:
        blk = wand.basis[out_sp.slot(t), :]
        if r and np.abs(blk).max() > 0:
            coeffs_i[t[::-1]] = blk
    inner = MultiAnalyticOp(op.n, r, op.dim_out, coeffs_i).trim(tol.eq_tol * 1e-3)
    # outer factor: component at e_beta of inner^* op(1 (x) k) is <op(1(x)k), S_beta w_j>
    sym = np.column_stack([op.symbol(e, N_w) for e in np.eye(op.dim_in)]) if op.dim_in else \
        np.zeros((out_sp.dim, 0), dtype=complex)
    coeffs_o = {}
    for beta in W.letter_tuples(op.n, op.deg):
        shifted = np.zeros((out_sp.dim, r), dtype=complex)
        for t in out_sp.letters:
            tt = beta + t
            if len(tt) <= N_w:
                shifted[out_sp.slot(tt), :] = wand.basis[out_sp.slot(t), :]
        c = nm.dagger(shifted) @ sym
        if c.size and np.abs(c).max() > 0:
            coeffs_o[beta[::-1]] = c
    outer = MultiAnalyticOp(op.n, op.dim_in, r, coeffs_o, deg=op.deg).trim(tol.eq_tol * 1e-3)
    prod = multiply(inner, outer)
    # coefficients of the product beyond op.deg must vanish as well
    tail = max((nm.opnorm(v) for k, v in prod.coeffs.items() if len(k) > op.deg), default=0.0)
    res = max(coefficient_distance(prod.truncate(op.deg), op), tail)
    idef = isometry_defect(inner)
    o_res = None
    if outer.dim_out and TruncatedFock(op.n, N_w, max(r, op.dim_in, 1)).dim <= 4000 \
            and N_w - outer.deg - 1 >= 0:
        o_res = outer_residual(outer, N_w, 1, tol)
    return InnerOuter(inner, outer, r, res, idef, o_res, N_w)
