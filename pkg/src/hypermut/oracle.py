"""Ground truth for passage times by direct linear algebra.

Nothing here uses the closed forms. Mean hitting times come from the
first-step equations and visit counts from the potential matrix of the
chain killed at ``j``. Matrices with :class:`~fractions.Fraction` entries
are solved exactly by Gauss-Jordan elimination, float matrices by LAPACK
with partial pivoting.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .chain import ClassDistribution, TransitionMatrix, n_step_matrix
from .errors import DomainError, SingularSystem

#: Exact rationals are the ``ExactScalar`` type of the rational backend.
ExactScalar = Fraction


@dataclass(frozen=True)
class PotentialMatrix:
    """Expected visits to ``k`` strictly before ``tau_j``, starting from ``i``."""

    target_class: int
    entries: np.ndarray

    def row_sums(self) -> np.ndarray:
        if self.entries.dtype == object:
            return np.array([sum(row, Fraction(0)) for row in self.entries], dtype=object)
        return self.entries.sum(axis=1)


def _solve_exact(A: list[list[Fraction]], B: list[list[Fraction]]) -> list[list[Fraction]]:
    """Solve ``A X = B`` over the rationals by Gauss-Jordan elimination."""
    n = len(A)
    m = len(B[0])
    M = [list(A[r]) + list(B[r]) for r in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise SingularSystem(f"zero pivot in column {col}")
        M[col], M[piv] = M[piv], M[col]
        prow = M[col]
        inv = 1 / prow[col]
        for c in range(col, n + m):
            prow[c] *= inv
        for r in range(n):
            if r == col:
                continue
            f = M[r][col]
            if f == 0:
                continue
            row = M[r]
            for c in range(col, n + m):
                if prow[c]:
                    row[c] -= f * prow[c]
    return [M[r][n:] for r in range(n)]


def _solve(A: np.ndarray, B: np.ndarray, exact: bool) -> np.ndarray:
    if exact:
        X = _solve_exact(A.tolist(), B.tolist())
        return np.array(X, dtype=object).reshape(B.shape)
    try:
        X = np.linalg.solve(A.astype(float), B.astype(float))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(X)):
        raise SingularSystem("non-finite solution")
    return X


def _support(matrix: TransitionMatrix) -> list[list[int]]:
    return [[k for k in range(matrix.size) if matrix[i, k] > 0] for i in range(matrix.size)]


def _check_reaches(matrix: TransitionMatrix, j: int):
    """Every state must lead to ``j``; otherwise the killed system is singular."""
    preds = [[] for _ in range(matrix.size)]
    for i, succ in enumerate(_support(matrix)):
        for k in succ:
            preds[k].append(i)
    seen = {j}
    todo = deque([j])
    while todo:
        v = todo.popleft()
        for u in preds[v]:
            if u not in seen:
                seen.add(u)
                todo.append(u)
    if len(seen) != matrix.size:
        missing = sorted(set(range(matrix.size)) - seen)
        raise SingularSystem(f"states {missing} never reach class {j}")


def _check_target(matrix, j):
    if int(j) != j or not 0 <= j < matrix.size:
        raise DomainError(f"target class must lie in [0, {matrix.size - 1}], got {j}")
    return int(j)


def _eye(n: int, exact: bool) -> np.ndarray:
    if not exact:
        return np.eye(n)
    eye = np.full((n, n), Fraction(0), dtype=object)
    for a in range(n):
        eye[a, a] = Fraction(1)
    return eye


def _killed(matrix: TransitionMatrix, j: int):
    """States other than ``j`` and ``I - Q`` for the chain restricted to them."""
    others = [k for k in range(matrix.size) if k != j]
    Q = matrix.entries[np.ix_(others, others)]
    return others, _eye(len(others), matrix.exact) - Q


def hitting_times_solve(matrix: TransitionMatrix, j: int) -> np.ndarray:
    """Mean of ``tau_j = inf{n >= 1 : Y_n = j}`` from every start state.

    Solves ``h(i) = 1 + sum_{k != j} P(i,k) h(k)`` on the states other than
    ``j``, then recovers the return time ``h(j)`` by one first-step
    average.
    """
    j = _check_target(matrix, j)
    _check_reaches(matrix, j)
    exact = matrix.exact
    P = matrix.entries
    one = Fraction(1) if exact else 1.0
    if matrix.size == 1:
        return np.array([one], dtype=object if exact else float)
    others, A = _killed(matrix, j)
    b = np.array([[one] for _ in others], dtype=object if exact else float)
    h_sub = _solve(A, b, exact)[:, 0]
    h = np.empty(matrix.size, dtype=object if exact else float)
    h[others] = h_sub
    h[j] = one + sum((P[j, k] * h_sub[idx] for idx, k in enumerate(others)), one * 0)
    return h


def potential_matrix(matrix: TransitionMatrix, j: int) -> PotentialMatrix:
    """Expected visit counts before ``tau_j`` (the ``n = 0`` position included)."""
    j = _check_target(matrix, j)
    _check_reaches(matrix, j)
    exact = matrix.exact
    P = matrix.entries
    n = matrix.size
    zero = Fraction(0) if exact else 0.0
    G = np.full((n, n), zero, dtype=object if exact else float)
    if n > 1:
        others, A = _killed(matrix, j)
        inv = _solve(A, _eye(n - 1, exact), exact)
        G[np.ix_(others, others)] = inv
        # from j: the n = 0 visit, then whatever the first step leads to
        G[j, others] = P[j, others] @ inv
    G[j, j] = zero + 1
    return PotentialMatrix(j, G)


def _exit_matrix(n, j, exact):
    H = np.full((n, n), Fraction(0) if exact else 0.0, dtype=object if exact else float)
    H[:, j] = Fraction(1) if exact else 1.0
    return H


def lempot_residual(matrix: TransitionMatrix, j: int):
    """``max |GP - H - G + I|`` over all entries; exactly zero for rational input."""
    G = potential_matrix(matrix, j).entries
    P = matrix.entries
    H = _exit_matrix(matrix.size, j, matrix.exact)
    R = G @ P - H - G + _eye(matrix.size, matrix.exact)
    return max(abs(x) for x in R.flat)


def _period(matrix: TransitionMatrix) -> int:
    """Period of the class of state 0, from BFS levels (0 if not all reached)."""
    succ = _support(matrix)
    level = {0: 0}
    todo = deque([0])
    g = 0
    while todo:
        u = todo.popleft()
        for v in succ[u]:
            if v not in level:
                level[v] = level[u] + 1
                todo.append(v)
            else:
                g = math.gcd(g, level[u] + 1 - level[v])
    return g if len(level) == matrix.size else 0


def _check_ergodic(matrix: TransitionMatrix):
    _check_reaches(matrix, 0)
    period = _period(matrix)
    if period == 0:
        raise SingularSystem("chain is reducible")
    if period != 1:
        raise DomainError("chain is periodic; no power of it is strictly positive")


def stationary_distribution(matrix: TransitionMatrix) -> ClassDistribution:
    """Unique invariant law of an irreducible aperiodic chain."""
    _check_ergodic(matrix)
    exact = matrix.exact
    n = matrix.size
    A = (matrix.entries - _eye(n, exact)).T.copy()
    A[-1, :] = Fraction(1) if exact else 1.0
    b = np.full((n, 1), Fraction(0) if exact else 0.0, dtype=object if exact else float)
    b[-1, 0] = Fraction(1) if exact else 1.0
    pi = _solve(A, b, exact)[:, 0]
    if not exact:
        pi = np.clip(pi, 0.0, 1.0)
    return ClassDistribution(pi)


def ergodic_limit_residual(matrix: TransitionMatrix, n: int) -> float:
    """``max_{i,j} |P^n(i,j) - pi(j)|``."""
    pi = stationary_distribution(matrix).probs.astype(float)
    Pn = n_step_matrix(matrix, n).to_float()
    return float(np.max(np.abs(Pn - pi[None, :])))


def ehrenfest_matrix(N: int, exact: bool = False) -> TransitionMatrix:
    """Urn chain: one of ``N`` balls moves to the other box each step."""
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N}")
    N = int(N)
    one = Fraction(1) if exact else 1.0
    P = np.full((N + 1, N + 1), one * 0, dtype=object if exact else float)
    for i in range(N + 1):
        if i > 0:
            P[i, i - 1] = one * i / N
        if i < N:
            P[i, i + 1] = one * (N - i) / N
    return TransitionMatrix(P)
