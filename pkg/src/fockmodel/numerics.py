"""Dense complex linear algebra helpers: PSD square roots, SVD ranks,
orthonormal subspace bases and the subspace calculus used everywhere else.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NotHermitian, NotPSD, Undetermined


def _default_eq_tol():
    raw = os.environ.get("FOCKMODEL_DEFAULT_TOL")
    if raw is None:
        return 1e-8
    try:
        val = float(raw)
    except ValueError:
        raise ValueError(f"FOCKMODEL_DEFAULT_TOL={raw!r} is not a number") from None
    return val


@dataclass(frozen=True)
class Tolerance:
    """rank_tol: relative singular value cut; eq_tol: absolute residual bound."""

    rank_tol: float = 1e-9
    eq_tol: float = field(default_factory=_default_eq_tol)

    def __post_init__(self):
        if not 0 < self.rank_tol < 1:
            raise ValueError("rank_tol must lie in (0, 1)")
        if not 0 < self.eq_tol < 1:
            raise ValueError("eq_tol must lie in (0, 1)")

    def as_dict(self):
        return {"rank_tol": self.rank_tol, "eq_tol": self.eq_tol}


DEFAULT_TOL = Tolerance()


def _tol(tol):
    return DEFAULT_TOL if tol is None else tol


def as_cmatrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError("expected a 2-d array")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries")
    return a


def to_pairs(a) -> list:
    """Matrix as nested rows of [re, im] pairs."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def from_pairs(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("expected rows of [re, im] pairs")
    return as_cmatrix(arr[..., 0] + 1j * arr[..., 1])


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def opnorm(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def hermitize(a):
    return 0.5 * (a + dagger(a))


def psd_sqrt(a, tol: Tolerance | None = None, cutoff: float = 0.0) -> np.ndarray:
    """Hermitian PSD square root.

    Eigenvalues in [-eq_tol, 0) are clamped to zero; eigenvalues at or below
    ``cutoff`` are also zeroed so rank decisions made on ``a`` carry over.
    """
    tol = _tol(tol)
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("psd_sqrt needs a square matrix")
    if a.shape[0] == 0:
        return a.copy()
    scale = max(1.0, opnorm(a))
    if np.abs(a - dagger(a)).max() > tol.eq_tol * scale:
        raise NotHermitian(f"asymmetry {np.abs(a - dagger(a)).max():.3e}")
    w, v = np.linalg.eigh(hermitize(a))
    if w.min() < -tol.eq_tol * scale:
        raise NotPSD(f"eigenvalue {w.min():.3e} below -eq_tol")
    w = np.where(w <= cutoff, 0.0, w)
    return (v * np.sqrt(w)) @ dagger(v)


def _normalize_phases(q: np.ndarray) -> np.ndarray:
    # canonical phase: largest-modulus entry of each column real positive
    if q.size == 0:
        return q
    idx = np.argmax(np.abs(q) > np.abs(q).max(axis=0) * (1 - 1e-9), axis=0)
    piv = q[idx, np.arange(q.shape[1])]
    return q * (np.conj(piv) / np.abs(piv))


class Subspace:
    """Subspace of C^ambient held as a matrix with orthonormal columns."""

    __slots__ = ("basis",)

    def __init__(self, basis):
        basis = np.asarray(basis, dtype=complex)
        if basis.ndim != 2:
            raise ValueError("basis must be 2-d")
        self.basis = basis

    @classmethod
    def zero(cls, ambient):
        return cls(np.zeros((ambient, 0), dtype=complex))

    @classmethod
    def full(cls, ambient):
        return cls(np.eye(ambient, dtype=complex))

    @classmethod
    def span(cls, vectors, tol=None, scale=None):
        return range_basis(vectors, tol, scale=scale)

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    def projector(self):
        return self.basis @ dagger(self.basis)

    def orthonormality_residual(self):
        if self.dim == 0:
            return 0.0
        return float(np.abs(dagger(self.basis) @ self.basis - np.eye(self.dim)).max())

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient={self.ambient_dim})"


# backwards-friendly alias used in reports
SubspaceBasis = Subspace


def _rank_from_singular(s, tol, scale):
    if s.size == 0:
        return 0
    ref = s[0] if scale is None else scale
    if ref <= 0:
        return 0
    return int(np.sum(s > tol.rank_tol * ref))


def range_basis(a, tol: Tolerance | None = None, scale: float | None = None) -> Subspace:
    """Orthonormal basis of the column space.

    Rank counts singular values above rank_tol * sigma_max (or rank_tol * scale
    when a natural scale is known). A full-rank range returns the standard basis.
    """
    tol = _tol(tol)
    a = as_cmatrix(a)
    m = a.shape[0]
    if a.shape[1] == 0 or m == 0:
        return Subspace.zero(m)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    r = _rank_from_singular(s, tol, scale)
    if r == m:
        return Subspace.full(m)
    return Subspace(_normalize_phases(u[:, :r]))


def kernel_basis(a, tol: Tolerance | None = None, scale: float | None = None) -> Subspace:
    """Orthonormal basis of the null space by the same rank threshold."""
    tol = _tol(tol)
    a = as_cmatrix(a)
    ncol = a.shape[1]
    if a.shape[0] == 0 or ncol == 0:
        return Subspace.full(ncol)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    r = _rank_from_singular(s, tol, scale)
    if r == 0:
        return Subspace.full(ncol)
    return Subspace(_normalize_phases(dagger(vh[r:, :])))


def rank(a, tol: Tolerance | None = None, scale: float | None = None) -> int:
    a = as_cmatrix(a)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return _rank_from_singular(s, _tol(tol), scale)


def _check_ambient(a: Subspace, b: Subspace):
    if a.ambient_dim != b.ambient_dim:
        raise ValueError(f"ambient mismatch {a.ambient_dim} vs {b.ambient_dim}")


def complement(a: Subspace, within: Subspace | None = None, tol=None) -> Subspace:
    """Orthogonal complement of a, in the ambient space or inside ``within``."""
    tol = _tol(tol)
    if within is None:
        if a.dim == 0:
            return Subspace.full(a.ambient_dim)
        u, s, _ = np.linalg.svd(a.basis, full_matrices=True)
        r = int(np.sum(s > 0.5))
        return Subspace(_normalize_phases(u[:, r:]))
    _check_ambient(a, within)
    # vectors of `within` orthogonal to a
    coeff = kernel_basis(dagger(a.basis) @ within.basis, tol, scale=1.0)
    return orthonormalize(within.basis @ coeff.basis, tol)


def orthonormalize(vectors, tol=None) -> Subspace:
    return range_basis(vectors, tol, scale=1.0)


def subspace_sum(a: Subspace, b: Subspace, tol=None) -> Subspace:
    _check_ambient(a, b)
    return range_basis(np.hstack([a.basis, b.basis]), tol, scale=1.0)


def intersect(a: Subspace, b: Subspace, tol=None, atol: float | None = None) -> Subspace:
    """Vectors of b lying in a up to sin(angle) <= atol (default eq_tol)."""
    tol = _tol(tol)
    _check_ambient(a, b)
    atol = tol.eq_tol if atol is None else atol
    if a.dim == 0 or b.dim == 0:
        return Subspace.zero(a.ambient_dim)
    resid = b.basis - a.basis @ (dagger(a.basis) @ b.basis)
    _, s, vh = np.linalg.svd(resid, full_matrices=True)
    s_full = np.zeros(b.dim)
    s_full[: s.size] = s
    keep = s_full <= atol
    if not keep.any():
        return Subspace.zero(a.ambient_dim)
    coeff = dagger(vh)[:, keep]
    return orthonormalize(b.basis @ coeff, tol)


def image(m, a: Subspace, tol=None, scale=None) -> Subspace:
    m = as_cmatrix(m)
    if m.shape[1] != a.ambient_dim:
        raise ValueError("matrix/subspace dimension mismatch")
    return range_basis(m @ a.basis, tol, scale=scale)


def containment_residual(big: Subspace, small: Subspace) -> float:
    _check_ambient(big, small)
    if small.dim == 0:
        return 0.0
    resid = small.basis - big.basis @ (dagger(big.basis) @ small.basis)
    return opnorm(resid)


def contains(big: Subspace, small: Subspace, tol=None) -> bool:
    """True if small is contained in big within eq_tol."""
    return containment_residual(big, small) <= _tol(tol).eq_tol


def distance(a: Subspace, b: Subspace) -> float:
    """Spectral-norm distance between the orthogonal projectors."""
    _check_ambient(a, b)
    return opnorm(a.projector() - b.projector())


def preimage(m, a: Subspace, domain: Subspace | None = None, tol=None) -> Subspace:
    """{x in domain : m x in a}."""
    tol = _tol(tol)
    m = as_cmatrix(m)
    if domain is None:
        domain = Subspace.full(m.shape[1])
    ambient_out = m.shape[0]
    if a.dim == ambient_out:
        return domain
    perp = complement(a)
    coeff = kernel_basis(dagger(perp.basis) @ m @ domain.basis, tol, scale=max(1.0, opnorm(m)))
    return orthonormalize(domain.basis @ coeff.basis, tol)


def align_unitary(a, b, tol=None) -> np.ndarray:
    """Unitary U minimizing ||U a - b||_F (orthogonal Procrustes).

    Raises Undetermined when b a^H is rank deficient, i.e. the minimizer is
    not unique.
    """
    tol = _tol(tol)
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    m = b @ dagger(a)
    if m.shape[0] == 0:
        return np.zeros((0, 0), dtype=complex)
    x, s, yh = np.linalg.svd(m)
    if s.size == 0 or s[-1] <= tol.rank_tol * max(s[0], 1e-300) or s[0] == 0:
        raise Undetermined("Procrustes problem is rank-degenerate")
    return x @ yh


def polar_unitary(m) -> np.ndarray:
    """Unitary factor of the polar decomposition of a square matrix."""
    m = as_cmatrix(m)
    if m.size == 0:
        return m.copy()
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def solve_lstsq(a, b):
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    if a.shape[1] == 0:
        return np.zeros((0, b.shape[1]), dtype=complex)
    sol, *_ = sla.lstsq(a, b)
    return sol
