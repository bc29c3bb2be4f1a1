"""Truncated full Fock space F^2_{<=N}(H_n) (x) C^m and its creation operators."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import words as W
from .errors import DimensionTooLarge

MAX_DIM = 200_000


@dataclass(frozen=True)
class TruncatedFock:
    n: int
    max_deg: int
    coeff_dim: int = 1

    def __post_init__(self):
        if self.n < 1 or self.max_deg < 0 or self.coeff_dim < 0:
            raise ValueError("need n >= 1, max_deg >= 0, coeff_dim >= 0")
        if self.dim > MAX_DIM:
            raise DimensionTooLarge(
                f"truncated Fock space of dimension {self.dim} exceeds {MAX_DIM}")

    @property
    def num_words(self) -> int:
        return W.count_words(self.n, self.max_deg)

    @property
    def dim(self) -> int:
        return self.num_words * self.coeff_dim

    @cached_property
    def words(self):
        return W.enumerate_words(self.n, self.max_deg)

    @property
    def letters(self):
        return W.letter_tuples(self.n, self.max_deg)

    @property
    def index(self):
        return W.word_index(self.n, self.max_deg)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(t) for t in self.letters])

    def slot(self, word) -> slice:
        """Coordinate range of e_word (x) C^m."""
        t = word.letters if isinstance(word, W.Word) else tuple(word)
        j = self.index[t]
        return slice(j * self.coeff_dim, (j + 1) * self.coeff_dim)

    def degree_mask(self, deg_set) -> np.ndarray:
        deg_set = set(deg_set)
        per_word = np.isin(self.degrees, sorted(deg_set))
        return np.repeat(per_word, self.coeff_dim)

    def vector(self, parts: dict) -> np.ndarray:
        """Assemble a vector from {word: coefficient vector}."""
        out = np.zeros(self.dim, dtype=complex)
        for w, v in parts.items():
            out[self.slot(w)] = v
        return out

    def component(self, x, word) -> np.ndarray:
        return np.asarray(x)[self.slot(word)]


def _word_map(space: TruncatedFock, fn):
    """Index map j -> fn(word_j) index (or -1 when truncated away)."""
    idx = space.index
    out = np.full(space.num_words, -1, dtype=int)
    for j, t in enumerate(space.letters):
        target = fn(t)
        if target is not None:
            out[j] = idx.get(target, -1)
    return out


def _perm_matrix(space: TruncatedFock, targets: np.ndarray) -> np.ndarray:
    m = space.coeff_dim
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    src = np.nonzero(targets >= 0)[0]
    for c in range(m):
        mat[targets[src] * m + c, src * m + c] = 1.0
    return mat


def creation_matrix(space: TruncatedFock, i: int, side: str = "left") -> np.ndarray:
    """Matrix of S_i (x) I (left) or R_i (x) I (right); top degree maps to 0."""
    if not 1 <= i <= space.n:
        raise ValueError(f"generator index {i} outside 1..{space.n}")
    if side == "left":
        fn = lambda t: (i,) + t  # noqa: E731
    elif side == "right":
        fn = lambda t: t + (i,)  # noqa: E731
    else:
        raise ValueError("side must be 'left' or 'right'")
    return _perm_matrix(space, _word_map(space, fn))


def creation_matrices(space: TruncatedFock, side: str = "left") -> list:
    return [creation_matrix(space, i, side) for i in range(1, space.n + 1)]


def degree_projector(space: TruncatedFock, deg_set) -> np.ndarray:
    deg_set = set(deg_set)
    if not deg_set <= set(range(space.max_deg + 1)):
        raise ValueError("degrees outside 0..N")
    return np.diag(space.degree_mask(deg_set).astype(complex))


def flip_unitary(space: TruncatedFock) -> np.ndarray:
    """Permutation e_alpha (x) k -> e_{reverse alpha} (x) k."""
    return _perm_matrix(space, _word_map(space, lambda t: t[::-1]))


def embed(small: TruncatedFock, big: TruncatedFock) -> np.ndarray:
    """Inclusion of a lower-degree truncation into a higher one."""
    if (small.n, small.coeff_dim) != (big.n, big.coeff_dim) or small.max_deg > big.max_deg:
        raise ValueError("incompatible truncations")
    out = np.zeros((big.dim, small.dim), dtype=complex)
    out[: small.dim, :] = np.eye(small.dim)
    return out
