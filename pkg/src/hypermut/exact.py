"""Closed forms and convergent series for mean passage times of the lumped chain.

``tau_j = inf{n >= 1 : Y_n = j}``. Three families of evaluators live here:

* closed forms: traversal ``N -> 0`` and returns ``j -> j``;
* two series for an arbitrary pair ``(i, j)``: one built from the class
  occupation probabilities, one from the expanded binomial sums;
* the occupation and first-passage generating functions ``F`` and ``G``.

All of them work in double precision. Exact rationals live in
:mod:`hypermut.oracle`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .chain import ModelParams, binomial, occupation_probs, _check_class
from .errors import DomainError, NonConvergence, PoleAtArgument

_EPS = np.finfo(float).eps


class Method(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    KAC_SERIES = "kac_series"
    EXPLICIT_SERIES = "explicit_series"
    ORACLE = "oracle"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy shared by every infinite series.

    A series stops at the first index ``n >= min_terms`` where the last two
    terms are both below ``abs_tol`` in magnitude.
    """

    abs_tol: float = 1e-12
    max_terms: int = 100_000
    min_terms: int = 8

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be positive")
        if self.min_terms < 1 or self.max_terms < self.min_terms:
            raise DomainError("need max_terms >= min_terms >= 1")


DEFAULT_CONTROL = SeriesControl()


@dataclass(frozen=True)
class PassageTimeReport:
    from_class: int
    to_class: int
    value: float
    method: Method
    error_bound: float | None = None
    terms_used: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.value >= 1 - 1e-9:
            raise DomainError(f"a passage time is at least one step, got {self.value}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        return d


def _float_params(params: ModelParams) -> tuple[int, float]:
    return params.n_sites, float(params.mut_prob)


# -- closed forms -----------------------------------------------------------

def traversal_time(params: ModelParams, *, odd_only: bool = False) -> PassageTimeReport:
    """Mean time to reach class 0 from class N.

    Even ``k`` contribute exactly zero; ``odd_only`` skips them and must give
    the same number.
    """
    N, p = _float_params(params)
    r = 1.0 - 2.0 * p
    ks = range(1, N + 1, 2) if odd_only else range(1, N + 1)
    value = math.fsum(binomial(N, k) * (1 - (-1) ** k) / (1.0 - r ** k) for k in ks)
    return PassageTimeReport(N, 0, value, Method.CLOSED_FORM)


def return_time_zero(params: ModelParams) -> PassageTimeReport:
    N = params.n_sites
    return PassageTimeReport(0, 0, float(2 ** N), Method.CLOSED_FORM)


def return_time_class(params: ModelParams, j: int) -> PassageTimeReport:
    """Mean recurrence time of class ``j``: ``2**N / C(N, j)``, independent of ``p``."""
    j = _check_class(params, j, "j")
    N = params.n_sites
    value = 2 ** N / binomial(N, j)
    return PassageTimeReport(j, j, float(value), Method.CLOSED_FORM)


# -- series machinery -------------------------------------------------------

@dataclass
class _SeriesResult:
    total: float
    last_term: float
    terms_used: int
    magnitude: float


def _truncated_sum(block: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
                   head: float, ctrl: SeriesControl, what: str) -> _SeriesResult:
    """Sum ``head + sum_{n >= 1} t_n`` with the shared stopping rule.

    ``block(ns)`` returns the terms ``t_n`` and a magnitude estimate for each
    (used only for the rounding bound). Blocks keep the sum vectorised while
    the stopping index is still found term by term.
    """
    terms = [head]
    mags = [abs(head)]
    prev_small = abs(head) < ctrl.abs_tol
    n0 = 1
    size = 64
    while n0 < ctrl.max_terms:
        ns = np.arange(n0, min(n0 + size, ctrl.max_terms))
        t, m = block(ns)
        small = np.abs(t) < ctrl.abs_tol
        both = small.copy()
        both[0] = small[0] and prev_small
        both[1:] &= small[:-1]
        both &= ns >= ctrl.min_terms
        hit = np.flatnonzero(both)
        if hit.size:
            stop = hit[0] + 1
            terms.extend(t[:stop].tolist())
            mags.extend(m[:stop].tolist())
            return _SeriesResult(math.fsum(terms), abs(float(t[stop - 1])),
                                 int(ns[stop - 1]) + 1, math.fsum(mags))
        terms.extend(t.tolist())
        mags.extend(m.tolist())
        prev_small = bool(small[-1])
        n0 = int(ns[-1]) + 1
        size = min(size * 2, 8192)
    raise NonConvergence(f"{what}: no convergence within {ctrl.max_terms} terms",
                         terms_used=ctrl.max_terms, last_term=abs(terms[-1]))


def _error_bound(res: _SeriesResult, params: ModelParams) -> float:
    """Geometric tail estimate plus floating-point accumulation error."""
    N, p = _float_params(params)
    rate = abs(1.0 - 2.0 * p)
    tail = res.last_term * rate / (1.0 - rate)
    rounding = (N + 4) * _EPS * res.magnitude
    return float(tail + rounding)


def _fast_half(params: ModelParams) -> bool:
    return float(params.mut_prob) == 0.5


def _neumaier(parts) -> tuple[np.ndarray, np.ndarray]:
    """Compensated elementwise sum of a sequence of equally shaped arrays."""
    s = None
    c = None
    mag = None
    for x in parts:
        if s is None:
            s = x.copy()
            c = np.zeros_like(x)
            mag = np.abs(x)
            continue
        t = s + x
        c += np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        s = t
        mag = mag + np.abs(x)
    return s + c, mag


def passage_time_explicit(params: ModelParams, i: int, j: int,
                          ctrl: SeriesControl = DEFAULT_CONTROL) -> PassageTimeReport:
    """Mean passage time ``i -> j`` from the fully expanded binomial series.

    With ``q = (1-2p)**n`` the ``n``-th term is ``C(N,j)**-1`` times::

        sum_k C(j,k) C(N-j,k) (1-q)**(2k) (1+q)**(N-2k)
            - C(i,j-k) C(N-i,k) (1-q)**(i-j+2k) (1+q)**(N-i+j-2k)

    The ``n = 0`` contribution is the recurrence time of ``j`` for every
    pair, which also makes ``i == j`` return the recurrence time.
    """
    i = _check_class(params, i, "i")
    j = _check_class(params, j, "j")
    N, p = _float_params(params)
    head = return_time_class(params, j).value
    if _fast_half(params):
        # q == 0 for n >= 1, where the bracket collapses to C(N,j) - C(N,j)
        return PassageTimeReport(i, j, head, Method.EXPLICIT_SERIES, 0.0, 2)
    r = 1.0 - 2.0 * p
    cj = float(binomial(N, j))
    weights = []
    for k in range(N + 1):
        w_ret = binomial(j, k) * binomial(N - j, k)
        if w_ret:
            weights.append((float(w_ret), 2 * k, N - 2 * k))
        w_from = binomial(i, j - k) * binomial(N - i, k)
        if w_from:
            weights.append((-float(w_from), i - j + 2 * k, N - i + j - 2 * k))

    def block(ns):
        q = np.power(r, ns.astype(float))
        lo, hi = 1.0 - q, 1.0 + q
        parts = [w * np.power(lo, a) * np.power(hi, b) for w, a, b in weights]
        s, mag = _neumaier(parts)
        return s / cj, mag / cj

    res = _truncated_sum(block, head, ctrl, f"explicit series ({i}->{j})")
    return PassageTimeReport(i, j, res.total, Method.EXPLICIT_SERIES,
                             _error_bound(res, params), res.terms_used)


def passage_time_kac_series(params: ModelParams, i: int, j: int,
                            ctrl: SeriesControl = DEFAULT_CONTROL) -> PassageTimeReport:
    """Mean passage time ``i -> j`` as recurrence time times summed occupation gaps.

    Sums ``P_j(Y_n = j) - P_i(Y_n = j)`` over ``n >= 1``; the ``n = 0`` gap is
    taken as 1 for every pair.
    """
    i = _check_class(params, i, "i")
    j = _check_class(params, j, "j")
    fparams = params.as_float()
    ret = return_time_class(params, j).value
    if _fast_half(params):
        return PassageTimeReport(i, j, ret, Method.KAC_SERIES, 0.0, 2)

    def block(ns):
        pj = occupation_probs(fparams, j, j, ns)
        pi = occupation_probs(fparams, i, j, ns)
        return ret * (pj - pi), ret * (pj + pi)

    res = _truncated_sum(block, ret, ctrl, f"Kac series ({i}->{j})")
    return PassageTimeReport(i, j, res.total, Method.KAC_SERIES,
                             _error_bound(res, params), res.terms_used)


# -- generating functions ---------------------------------------------------

def phi(params: ModelParams, k: int, z: float) -> float:
    """Auxiliary pole function ``C(N,k) / (1 - (1-2p)**k z)``."""
    N, p = _float_params(params)
    if not 0 <= k <= N:
        raise DomainError(f"k must lie in [0, {N}], got {k}")
    rk = 1.0 if k == 0 else (1.0 - 2.0 * p) ** k
    denom = 1.0 - rk * z
    if denom == 0:
        raise PoleAtArgument(f"phi_{k} has a pole at z={z}")
    return binomial(N, k) / denom


def f_generating(params: ModelParams, i: int, j: int, z: float,
                 ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Occupation generating function ``sum_{n>=1} P_i(Y_n = j) z**n`` for ``|z| < 1``."""
    i = _check_class(params, i, "i")
    j = _check_class(params, j, "j")
    if not abs(z) < 1:
        raise DomainError(f"generating functions are evaluated for |z| < 1, got {z}")
    fparams = params.as_float()
    if _fast_half(params):
        pi_j = binomial(params.n_sites, j) / 2 ** params.n_sites
        return pi_j * z / (1.0 - z)

    def block(ns):
        t = occupation_probs(fparams, i, j, ns) * np.power(float(z), ns.astype(float))
        return t, np.abs(t)

    return _truncated_sum(block, 0.0, ctrl, f"F_{i}{j}({z})").total


def g_generating(params: ModelParams, i: int, j: int, z: float,
                 ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """First-passage generating function ``sum_{n>=1} P_i(tau_j = n) z**n``.

    Obtained from the renewal identity ``F_ij = G_ij + F_jj G_ij``.
    """
    f_jj = f_generating(params, j, j, z, ctrl)
    if i == j:
        return 1.0 - 1.0 / (1.0 + f_jj)
    return f_generating(params, i, j, z, ctrl) / (1.0 + f_jj)


def vandermonde_check(N: int, j: int) -> bool:
    """Exact check of ``sum_l C(j,l) C(N-j,l) == C(N,j)``."""
    if not 0 <= j <= N:
        raise DomainError(f"need 0 <= j <= N, got j={j}, N={N}")
    lhs = sum(math.comb(j, l) * math.comb(N - j, l) for l in range(min(j, N - j) + 1))
    return lhs == math.comb(N, j)
