"""Words in the free semigroup on n generators.

A word is a tuple of letters in 1..n; the empty tuple is the identity g0.
Words are ordered graded-lexicographically (length first, then letters), and
that order is the basis order of every Fock space in the package.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True, order=False)
class Word:
    letters: tuple
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("alphabet size must be positive")
        letters = tuple(int(x) for x in self.letters)
        for x in letters:
            if not 1 <= x <= self.n:
                raise ValueError(f"letter {x} outside 1..{self.n}")
        object.__setattr__(self, "letters", letters)

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        if not self.letters:
            return "g0"
        return ".".join(f"g{x}" for x in self.letters)

    def sort_key(self):
        return (len(self.letters), self.letters)

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    @classmethod
    def parse(cls, text: str, n: int) -> "Word":
        text = text.strip()
        if text == "g0":
            return cls((), n)
        parts = text.split(".")
        if not all(p.startswith("g") and p[1:].isdigit() for p in parts):
            raise ValueError(f"cannot parse word {text!r}")
        return cls(tuple(int(p[1:]) for p in parts), n)


def identity(n: int) -> Word:
    return Word((), n)


def generator(i: int, n: int) -> Word:
    return Word((i,), n)


def concat(a: Word, b: Word) -> Word:
    if a.n != b.n:
        raise ValueError("alphabet mismatch")
    return Word(a.letters + b.letters, a.n)


def reverse(a: Word) -> Word:
    return Word(a.letters[::-1], a.n)


def factorizations(w: Word) -> list:
    """All (prefix, suffix) pairs whose concatenation is w."""
    k = len(w.letters)
    return [(Word(w.letters[:j], w.n), Word(w.letters[j:], w.n)) for j in range(k + 1)]


def count_words(n: int, max_len: int) -> int:
    if n == 1:
        return max_len + 1
    return (n ** (max_len + 1) - 1) // (n - 1)


@lru_cache(maxsize=64)
def _letter_tuples(n: int, max_len: int) -> tuple:
    out = []
    for k in range(max_len + 1):
        out.extend(itertools.product(range(1, n + 1), repeat=k))
    return tuple(out)


def enumerate_words(n: int, max_len: int) -> list:
    """All words of length <= max_len in graded-lexicographic order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    return [Word(t, n) for t in _letter_tuples(n, max_len)]


def letter_tuples(n: int, max_len: int) -> tuple:
    """Same order as enumerate_words, as raw letter tuples (cheap to hash)."""
    if n < 1 or max_len < 0:
        raise ValueError("need n >= 1 and max_len >= 0")
    return _letter_tuples(n, max_len)


@lru_cache(maxsize=64)
def word_index(n: int, max_len: int) -> dict:
    """Map letter tuple -> position in the canonical order."""
    return {t: i for i, t in enumerate(_letter_tuples(n, max_len))}


def degree_offset(n: int, k: int) -> int:
    """Position of the first word of length k in the canonical order."""
    return count_words(n, k - 1) if k > 0 else 0
