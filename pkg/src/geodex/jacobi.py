"""Finite-difference model of ``A0 = -(d/dt + P)^2 - Q`` on twisted loops.

The unknowns are ``xi_0, ..., xi_{N-1}`` at ``t_k = k/N`` with the twisted
closure ``xi_N = E_sigma xi_0``.  The covariant difference

    (D xi)_{k+1/2} = [(1 + h P/2) xi_{k+1} - (1 - h P/2) xi_k] / h,

with ``P`` evaluated at the midpoint, is a second-order approximation of
``(d/dt + P) xi``.  Since ``P`` is skew, ``-(d/dt + P)^2`` is the adjoint square
of ``d/dt + P`` and the discrete operator is ``D^T D - diag(Q_k)``, which is
symmetric by construction and bounded below by ``-max |Q|``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import AssemblyError, DegeneracyError, ParameterError, ResolutionError
from .framing import ClosedFrame, Coefficients, frame_for_orbit

DEFAULT_START_GRID = 128


@dataclass(frozen=True, eq=False)
class DiscretizedOperator:
    matrix: np.ndarray
    N: int
    n: int
    sigma: int
    twist: np.ndarray
    q_norm: float
    tag: str = "A0"


@dataclass(frozen=True)
class SpectralCount:
    ind: int
    null: int
    eigenvalues_near_zero: tuple
    gap: float
    null_tol: float
    lowest: tuple
    N: int

    @property
    def degenerate(self) -> bool:
        return self.null > 0 or self.gap < 10.0 * self.null_tol


def _as_coefficients(data) -> Coefficients:
    if isinstance(data, Coefficients):
        return data
    if isinstance(data, ClosedFrame):
        return data.coefficients()
    raise ParameterError(f"cannot build an operator from {type(data).__name__}")


def difference_matrix(coef: Coefficients, N: int) -> np.ndarray:
    """Matrix of the covariant difference ``D`` (``nN x nN``)."""
    n = coef.n
    h = 1.0 / N
    d = np.zeros((n * N, n * N))
    eye = np.eye(n)
    e = coef.twist
    for k in range(N):
        p = coef.p((k + 0.5) * h)
        rows = slice(n * k, n * k + n)
        d[rows, n * k:n * k + n] -= (eye - 0.5 * h * p) / h
        fwd = (eye + 0.5 * h * p) / h
        if k + 1 < N:
            d[rows, n * (k + 1):n * (k + 2)] += fwd
        else:
            d[rows, 0:n] += fwd @ e
    return d


def assemble_A0(data, N: int, tag: str = "A0", boundary_tol: float = 1e-8) -> DiscretizedOperator:
    """Dense symmetric matrix of the twisted operator on ``N`` grid points."""
    coef = _as_coefficients(data)
    if N < 8:
        raise ParameterError("grid size must be at least 8")
    if coef.grid is not None and coef.grid % N:
        raise ParameterError(f"grid size {N} does not divide the coefficient grid {coef.grid}")
    qs = [coef.q(k / N) for k in range(N)]
    q_norm = max(float(np.abs(q).max()) for q in qs) if qs else 0.0
    if coef.boundary_defect() > boundary_tol * (1.0 + q_norm):
        raise AssemblyError("coefficients violate the twisted boundary relations")
    d = difference_matrix(coef, N)
    a = d.T @ d
    n = coef.n
    for k, q in enumerate(qs):
        a[n * k:n * k + n, n * k:n * k + n] -= q
    a = 0.5 * (a + a.T)
    return DiscretizedOperator(a, N, n, coef.sigma, coef.twist, q_norm, tag)


def default_null_tol(op: DiscretizedOperator) -> float:
    return 1e-6 * (1.0 + op.q_norm)


def spectral_count(op: DiscretizedOperator, null_tol: float | None = None,
                   keep: int = 12) -> SpectralCount:
    """Negative and near-zero eigenvalue counts of a discretised operator."""
    tol = default_null_tol(op) if null_tol is None else float(null_tol)
    try:
        w = eigh(op.matrix, eigvals_only=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise ResolutionError(f"eigensolver failed: {exc}") from exc
    near = w[np.abs(w) <= tol]
    outside = np.abs(w[np.abs(w) > tol])
    gap = float(outside.min()) if outside.size else float("inf")
    return SpectralCount(int(np.sum(w < -tol)), int(near.size), tuple(float(v) for v in near),
                         gap, tol, tuple(float(v) for v in w[:keep]), op.N)


def stable_count(data, start: int = DEFAULT_START_GRID, max_grid: int | None = None,
                 null_tol: float | None = None) -> tuple[SpectralCount, list]:
    """Double the grid until ``(Ind, Null)`` agree on two consecutive grids.

    Returns the finer count and the whole history.
    """
    coef = _as_coefficients(data)
    limit = max_grid or (coef.grid if coef.grid is not None else 1024)
    history = []
    N = start
    while N <= limit:
        history.append(spectral_count(assemble_A0(coef, N), null_tol))
        if len(history) >= 2 and (history[-1].ind, history[-1].null) == (history[-2].ind, history[-2].null):
            return history[-1], history
        N *= 2
    raise ResolutionError(
        "Morse index did not stabilise: " + ", ".join(f"N={c.N}: ({c.ind},{c.null})" for c in history))


def morse_index(model, pot, orbit, frame: ClosedFrame | None = None,
                start: int = DEFAULT_START_GRID, max_grid: int | None = None,
                null_tol: float | None = None) -> SpectralCount:
    """Morse index and nullity of the orbit, with automatic grid doubling.

    Raises :class:`DegeneracyError` for a non-trivial kernel or for a spectral
    gap below ten times the null tolerance.
    """
    if frame is None:
        frame = frame_for_orbit(model, pot, orbit)
    count, _ = stable_count(frame, start, max_grid, null_tol)
    if count.null > 0:
        raise DegeneracyError(f"orbit is degenerate: nullity {count.null}")
    if count.gap < 10.0 * count.null_tol:
        raise DegeneracyError(f"spectral gap {count.gap:.3g} is below ten times the null tolerance")
    return count
