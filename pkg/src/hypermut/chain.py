"""Lumped mutation chain on Hamming classes.

A genotype is a binary string of length ``N``. At every step each site
flips independently with probability ``p``. The number of ones ``Y_n`` is
itself a Markov chain on ``{0, ..., N}``; this module builds its n-step
laws and transition matrix.

Every routine accepts ``mut_prob`` either as a float or as a
:class:`fractions.Fraction`. With a fraction, the probabilities come out as
exact rationals and matrices use ``dtype=object``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .errors import DomainError

#: Above this genome length float probabilities are accumulated in log domain.
LOG_DOMAIN_THRESHOLD = 40
#: Largest ``n`` for which :func:`binomial` returns an exact integer.
EXACT_BINOMIAL_MAX = 60

_STOCHASTIC_ATOL = 1e-12


def is_exact(x) -> bool:
    """True for exact rationals (ints, Fractions), False for floats."""
    return isinstance(x, Rational)


@dataclass(frozen=True)
class ModelParams:
    """Genome length ``n_sites`` and per-site mutation probability ``mut_prob``."""

    n_sites: int
    mut_prob: float | Fraction

    def __post_init__(self):
        if isinstance(self.n_sites, bool) or int(self.n_sites) != self.n_sites:
            raise DomainError(f"n_sites must be an integer, got {self.n_sites!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        if self.n_sites < 1:
            raise DomainError(f"n_sites must be >= 1, got {self.n_sites}")
        p = self.mut_prob
        if isinstance(p, int) and not isinstance(p, bool):
            p = Fraction(p)
        elif not is_exact(p):
            p = float(p)
        if not 0 < p < 1:
            raise DomainError(f"mut_prob must lie in the open interval (0, 1), got {p}")
        object.__setattr__(self, "mut_prob", p)

    @property
    def exact(self) -> bool:
        return is_exact(self.mut_prob)

    @property
    def eigen_ratio(self):
        """The single-site eigenvalue ``1 - 2p``."""
        return 1 - 2 * self.mut_prob

    def as_float(self) -> "ModelParams":
        if not self.exact:
            return self
        return ModelParams(self.n_sites, float(self.mut_prob))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def _sums_to_one(values, atol) -> bool:
    total = sum(values) if values.dtype == object else math.fsum(values)
    if is_exact(total):
        return total == 1
    return abs(total - 1) <= atol


@dataclass(frozen=True)
class ClassDistribution:
    """Probability vector over the Hamming classes ``0..N``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs)
        if probs.dtype != object:
            probs = probs.astype(float)
        if probs.ndim != 1 or probs.size < 2:
            raise DomainError("a class distribution needs at least two entries")
        if any(x < 0 or x > 1 for x in probs):
            raise DomainError("class probabilities must lie in [0, 1]")
        if not _sums_to_one(probs, _STOCHASTIC_ATOL):
            raise DomainError("class probabilities must sum to 1")
        object.__setattr__(self, "probs", _freeze(probs))

    @property
    def n_sites(self) -> int:
        return self.probs.size - 1

    def __len__(self):
        return self.probs.size

    def __getitem__(self, j):
        return self.probs[j]

    def __iter__(self):
        return iter(self.probs)

    def total_variation(self, other) -> float:
        other = np.asarray(getattr(other, "probs", other), dtype=float)
        return 0.5 * float(np.abs(self.probs.astype(float) - other).sum())


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic ``(N+1) x (N+1)`` matrix of a chain on ``{0..N}``.

    ``atol`` is the row-sum tolerance; matrix powers are checked with a
    looser one than freshly built matrices.
    """

    entries: np.ndarray
    atol: float = _STOCHASTIC_ATOL

    def __post_init__(self):
        entries = np.asarray(self.entries)
        if entries.dtype != object:
            entries = entries.astype(float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DomainError("transition matrix must be square")
        if any(x < 0 for x in entries.flat):
            raise DomainError("transition matrix entries must be non-negative")
        for row in entries:
            if not _sums_to_one(row, self.atol):
                raise DomainError("transition matrix rows must sum to 1")
        object.__setattr__(self, "entries", _freeze(entries))

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def exact(self) -> bool:
        return self.entries.dtype == object and all(is_exact(x) for x in self.entries.flat)

    def row(self, i: int) -> ClassDistribution:
        return ClassDistribution(self.entries[i])

    def to_float(self) -> np.ndarray:
        return self.entries.astype(float)

    def __getitem__(self, idx):
        return self.entries[idx]


@dataclass(frozen=True)
class SingleSiteKernel:
    """Entries of the n-th power of the 2x2 single-site matrix."""

    stay_prob: float | Fraction
    step_count: int

    @property
    def flip_prob(self):
        return 1 - self.stay_prob

    def as_matrix(self) -> np.ndarray:
        s, f = self.stay_prob, self.flip_prob
        dtype = object if is_exact(s) else float
        return np.array([[s, f], [f, s]], dtype=dtype)


def binomial(n: int, k: int):
    """Binomial coefficient with ``C(n, k) = 0`` outside ``0 <= k <= n``.

    Exact integers up to ``n = 60``; above that the value is a float computed
    through log-gamma.
    """
    if n < 0:
        raise DomainError(f"binomial needs n >= 0, got {n}")
    if k < 0 or k > n:
        return 0
    if n <= EXACT_BINOMIAL_MAX:
        return math.comb(n, k)
    return math.exp(math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1))


def _check_steps(n):
    if n < 0 or int(n) != n:
        raise DomainError(f"step count must be a non-negative integer, got {n}")


def p_step(params: ModelParams, n: int):
    """Probability that a single site shows its initial value after ``n`` steps."""
    _check_steps(n)
    if n == 0:
        # 0**0 corner at p = 1/2
        return Fraction(1) if params.exact else 1.0
    return (1 + params.eigen_ratio ** n) / 2


def single_site_power(params: ModelParams, n: int) -> SingleSiteKernel:
    return SingleSiteKernel(stay_prob=p_step(params, n), step_count=int(n))


def _check_class(params, i, name="start_class"):
    if int(i) != i or not 0 <= i <= params.n_sites:
        raise DomainError(f"{name} must lie in [0, {params.n_sites}], got {i}")
    return int(i)


def _binomial_pmf(m: int, prob: float) -> np.ndarray:
    """PMF of Bin(m, prob) on 0..m, in log domain for long genomes."""
    k = np.arange(m + 1)
    if m <= LOG_DOMAIN_THRESHOLD:
        coeffs = np.array([math.comb(m, kk) for kk in k], dtype=float)
        return coeffs * np.power(prob, k) * np.power(1.0 - prob, m - k)
    log_c = np.array([math.lgamma(m + 1) - math.lgamma(kk + 1) - math.lgamma(m - kk + 1) for kk in k])
    with np.errstate(divide="ignore"):
        lp, lq = np.log(prob), np.log1p(-prob)
    # 0 * log(0) must vanish
    terms = log_c + np.where(k > 0, k * lp, 0.0) + np.where(m - k > 0, (m - k) * lq, 0.0)
    return np.exp(terms)


def _exact_class_probs(n_sites: int, i: int, pn: Fraction) -> list:
    qn = 1 - pn
    out = []
    for j in range(n_sites + 1):
        total = Fraction(0)
        for k in range(max(0, i + j - n_sites), min(i, j) + 1):
            total += (math.comb(i, k) * math.comb(n_sites - i, j - k)
                      * qn ** (i + j - 2 * k) * pn ** (n_sites - i - j + 2 * k))
        out.append(total)
    return out


def class_distribution(params: ModelParams, start_class: int, n: int) -> ClassDistribution:
    """Law of ``Y_n`` given ``Y_0 = start_class``.

    The ``start_class`` ones each survive with probability ``p_n`` and the
    remaining zeros each flip to one with probability ``1 - p_n``, so the
    class count is the sum of two independent binomials.
    """
    i = _check_class(params, start_class)
    _check_steps(n)
    N = params.n_sites
    if n == 0:
        if params.exact:
            probs = np.array([Fraction(int(j == i)) for j in range(N + 1)], dtype=object)
        else:
            probs = np.zeros(N + 1)
            probs[i] = 1.0
        return ClassDistribution(probs)
    pn = p_step(params, n)
    if params.exact:
        return ClassDistribution(np.array(_exact_class_probs(N, i, pn), dtype=object))
    pn = float(pn)
    probs = np.convolve(_binomial_pmf(i, pn), _binomial_pmf(N - i, 1.0 - pn))
    return ClassDistribution(probs)


def occupation_probs(params: ModelParams, start_class: int, target_class: int, steps) -> np.ndarray:
    """``P(Y_n = target | Y_0 = start)`` for an array of step counts (float only).

    Vectorised over ``steps``; this is the hot loop of every series in
    :mod:`hypermut.exact`.
    """
    N = params.n_sites
    i = _check_class(params, start_class)
    j = _check_class(params, target_class, "target_class")
    steps = np.asarray(steps, dtype=np.int64)
    r = float(params.eigen_ratio)
    q = np.where(steps == 0, 1.0, np.power(r, steps.astype(float)))
    pn = 0.5 * (1.0 + q)
    qn = 0.5 * (1.0 - q)
    total = np.zeros(steps.shape, dtype=float)
    use_log = N > LOG_DOMAIN_THRESHOLD
    if use_log:
        with np.errstate(divide="ignore"):
            lp, lq = np.log(pn), np.log(qn)
    for k in range(max(0, i + j - N), min(i, j) + 1):
        a, b = i + j - 2 * k, N - i - j + 2 * k
        if use_log:
            logc = (math.lgamma(i + 1) - math.lgamma(k + 1) - math.lgamma(i - k + 1)
                    + math.lgamma(N - i + 1) - math.lgamma(j - k + 1) - math.lgamma(N - i - j + k + 1))
            expo = logc + (a * lq if a else 0.0) + (b * lp if b else 0.0)
            total += np.exp(expo)
        else:
            c = math.comb(i, k) * math.comb(N - i, j - k)
            total += c * np.power(qn, a) * np.power(pn, b)
    return total


def transition_matrix(params: ModelParams) -> TransitionMatrix:
    """One-step matrix of the lumped chain; row ``i`` is the law of ``Y_1`` from ``i``."""
    N = params.n_sites
    rows = [class_distribution(params, i, 1).probs for i in range(N + 1)]
    dtype = object if params.exact else float
    return TransitionMatrix(np.array(rows, dtype=dtype))


def identity_like(matrix: TransitionMatrix) -> np.ndarray:
    n = matrix.size
    if matrix.entries.dtype == object:
        eye = np.empty((n, n), dtype=object)
        for a in range(n):
            for b in range(n):
                eye[a, b] = Fraction(int(a == b))
        return eye
    return np.eye(n)


def n_step_matrix(matrix: TransitionMatrix, n: int) -> TransitionMatrix:
    """``n``-th power by repeated multiplication (no eigendecomposition)."""
    _check_steps(n)
    result = identity_like(matrix)
    for _ in range(int(n)):
        result = result @ matrix.entries
    return TransitionMatrix(result, atol=1e-10)
