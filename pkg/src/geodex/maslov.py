"""Robbin-Salamon and Conley-Zehnder indices through crossing forms.

For a path ``Psi`` with ``Psi' = -J0 S Psi`` the graph of ``Psi(t)`` meets the
diagonal exactly when ``ker(1 - Psi(t)) != 0``.  On that kernel the crossing
form is ``zeta -> -<zeta, S(t) zeta>``.  The index sums the signatures of all
crossings, with weight one half at ``t = 0`` and ``t = 1``.  At ``t = 0`` the
kernel is the whole space and the form is ``-S(0)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import total_ordering
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import AdmissibilityError, NumericsError, RegularityError, ResolutionError
from .orbits import J0
from .symplectic import (SymmetricFamily, SymplecticPath, fundamental_solution,
                         path_from_functions)

FORM_TOL = 1e-8
T_TOL = 1e-10


@total_ordering
@dataclass(frozen=True)
class HalfInteger:
    """Exact half-integer stored as twice its value."""

    twice_value: int

    @classmethod
    def from_value(cls, value) -> "HalfInteger":
        twice = 2 * value
        if int(round(twice)) != twice:
            raise ValueError(f"{value} is not a half-integer")
        return cls(int(round(twice)))

    @property
    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def __add__(self, other):
        other = other if isinstance(other, HalfInteger) else HalfInteger.from_value(other)
        return HalfInteger(self.twice_value + other.twice_value)

    __radd__ = __add__

    def __neg__(self):
        return HalfInteger(-self.twice_value)

    def __sub__(self, other):
        return self + (-(other if isinstance(other, HalfInteger) else HalfInteger.from_value(other)))

    def __eq__(self, other):
        if isinstance(other, HalfInteger):
            return self.twice_value == other.twice_value
        if isinstance(other, (int, float, np.integer, np.floating)):
            return self.twice_value == 2 * other
        return NotImplemented

    def __lt__(self, other):
        other = other if isinstance(other, HalfInteger) else HalfInteger.from_value(other)
        return self.twice_value < other.twice_value

    def __hash__(self):
        return hash(self.twice_value)

    def __int__(self):
        if not self.is_integer:
            raise ValueError(f"{self} is not an integer")
        return self.twice_value // 2

    def __float__(self):
        return self.twice_value / 2.0

    def __str__(self):
        return str(self.twice_value // 2) if self.is_integer else f"{self.twice_value}/2"

    def to_json(self):
        return self.twice_value // 2 if self.is_integer else self.twice_value / 2.0


def signature(sym, tol: float = FORM_TOL) -> int:
    """``n_+ - n_-`` of a symmetric matrix; eigenvalues within ``tol`` are an error."""
    sym = np.atleast_2d(np.asarray(sym, dtype=float))
    if sym.size == 0:
        return 0
    w = np.linalg.eigvalsh(0.5 * (sym + sym.T))
    if np.any(np.abs(w) <= tol):
        raise RegularityError(f"form is degenerate (eigenvalue {w[np.argmin(np.abs(w))]:.3g})")
    return int(np.sum(w > 0) - np.sum(w < 0))


@dataclass(frozen=True, eq=False)
class Crossing:
    t: float
    kernel: np.ndarray
    form: np.ndarray
    signature: int | None
    regular: bool

    @property
    def dim(self) -> int:
        return self.kernel.shape[1]


def default_kernel_tol(path: SymplecticPath) -> float:
    return 1e-7 * (1.0 + float(np.abs(path.psi).max()))


def kernel_basis(m: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of ``ker(1 - m)`` from singular values below ``tol``."""
    a = np.eye(m.shape[0]) - m
    _, s, vt = np.linalg.svd(a)
    return vt[s <= tol].T


def crossing_form(path: SymplecticPath, t: float, kernel: np.ndarray) -> np.ndarray:
    """``-<zeta_a, S(t) zeta_b>`` on a kernel basis, symmetrised."""
    s = path.generator_at(t)
    form = -kernel.T @ s @ kernel
    return 0.5 * (form + form.T)


def _make_crossing(path, t, kernel, form_tol):
    form = crossing_form(path, t, kernel)
    w = np.linalg.eigvalsh(form) if form.size else np.array([])
    regular = bool(np.all(np.abs(w) > form_tol))
    sig = int(np.sum(w > 0) - np.sum(w < 0)) if regular else None
    return Crossing(float(t), kernel, form, sig, regular)


def _smin(path, t):
    m = path.at(t)
    return np.linalg.svd(np.eye(m.shape[0]) - m, compute_uv=False)[-1]


def _det1m(path, t):
    m = path.at(t)
    return np.linalg.det(np.eye(m.shape[0]) - m)


def find_crossings(path: SymplecticPath, kernel_tol: float | None = None,
                   form_tol: float = FORM_TOL, t_tol: float = T_TOL) -> list[Crossing]:
    """All crossings of ``Graph Psi`` with the diagonal on the path's time span.

    Candidates are sign changes of ``det(1 - Psi)`` and grid-local minima of
    the smallest singular value of ``1 - Psi`` that are small compared with
    the distance the path travels in one step.  Each candidate is refined to
    ``t_tol`` (root bracketing or bounded minimisation).  Endpoints of the
    span are crossings when ``1 - Psi`` is singular there; for a path starting
    at the identity the first crossing has the whole space as kernel.
    """
    ktol = default_kernel_tol(path) if kernel_tol is None else kernel_tol
    times, psi = path.times, path.psi
    nn = psi.shape[1]
    eye = np.eye(nn)
    dets = np.linalg.det(eye - psi)
    smin = np.linalg.svd(eye - psi, compute_uv=False)[:, -1]
    h = float(np.max(np.diff(times)))
    speed = float(np.max(np.linalg.norm(path.generator, ord=2, axis=(1, 2)))
                  * np.max(np.linalg.norm(psi, ord=2, axis=(1, 2))))
    thr = 2.0 * h * speed + ktol
    last = len(times) - 1
    t_start, t_end = float(times[0]), float(times[-1])
    start_hit, end_hit = smin[0] <= ktol, smin[last] <= ktol
    found: list[float] = []

    def add(t):
        if all(abs(t - u) > 1e-8 for u in found):
            found.append(t)

    for k in range(1 if start_hit else 0, last - 1 if end_hit else last):
        if np.sign(dets[k]) * np.sign(dets[k + 1]) < 0:
            t = brentq(lambda s: _det1m(path, s), times[k], times[k + 1], xtol=t_tol)
            if _smin(path, t) > max(ktol, thr * 1e-3):
                raise ResolutionError(f"determinant changes sign near t = {t:.6g} without a kernel")
            add(t)
    roots = list(found)
    for k in range(1, last):
        if smin[k] < thr and smin[k] <= smin[k - 1] and smin[k] <= smin[k + 1]:
            # a determinant root in the bracket is the same crossing
            if any(times[k - 1] <= r <= times[k + 1] for r in roots):
                continue
            res = minimize_scalar(lambda s: _smin(path, s), bounds=(times[k - 1], times[k + 1]),
                                  method="bounded", options={"xatol": t_tol})
            if res.fun <= ktol and all(abs(res.x - u) > h for u in found):
                found.append(float(res.x))
    crossings = []
    if start_hit:
        crossings.append(_make_crossing(path, t_start, kernel_basis(psi[0], ktol), form_tol))
    for t in sorted(found):
        if t <= t_start + t_tol or t >= t_end - t_tol:
            continue
        m = path.at(t)
        basis = kernel_basis(m, max(ktol, 10.0 * float(np.linalg.svd(eye - m, compute_uv=False)[-1])))
        if basis.shape[1] == 0:
            raise ResolutionError(f"no kernel at refined crossing t = {t:.6g}")
        crossings.append(_make_crossing(path, t, basis, form_tol))
    if end_hit:
        crossings.append(_make_crossing(path, t_end, kernel_basis(psi[last], ktol), form_tol))
    return crossings


def rs_index(path: SymplecticPath, kernel_tol: float | None = None,
             form_tol: float = FORM_TOL) -> HalfInteger:
    """Robbin-Salamon index of ``(Graph Psi, diagonal)`` over the path's time span."""
    ends = (float(path.times[0]), float(path.times[-1]))
    total = 0
    for c in find_crossings(path, kernel_tol, form_tol):
        if not c.regular:
            raise RegularityError(f"irregular crossing at t = {c.t:.10g}", where=c.t)
        total += c.signature if c.t in ends else 2 * c.signature
    return HalfInteger(total)


def is_admissible(path: SymplecticPath, kernel_tol: float | None = None) -> bool:
    ktol = default_kernel_tol(path) if kernel_tol is None else kernel_tol
    m = path.end
    return bool(np.linalg.svd(np.eye(m.shape[0]) - m, compute_uv=False)[-1] > ktol)


def cz_index(path: SymplecticPath, kernel_tol: float | None = None,
             form_tol: float = FORM_TOL) -> HalfInteger:
    """Conley-Zehnder index of an admissible path (integer valued)."""
    if np.abs(path.psi[0] - np.eye(path.psi.shape[1])).max() > 1e-12:
        raise AdmissibilityError("path does not start at the identity")
    if not is_admissible(path, kernel_tol):
        raise AdmissibilityError("path ends on the Maslov cycle (det(1 - Psi(1)) = 0)")
    value = rs_index(path, kernel_tol, form_tol)
    if not value.is_integer:
        raise NumericsError(f"index of an admissible path came out as {value}")
    return value


def regularized_cz_index(family: SymmetricFamily, delta: float, steps: int | None = None,
                         **kwargs) -> HalfInteger:
    """CZ index of the path generated by ``S + delta * 1``.

    This changes the path; for small ``delta`` it approximates a fixed-endpoint
    homotopy to a path with regular crossings.
    """
    shift = delta * np.eye(2 * family.n)
    func = None if family.func is None else (lambda t: family.func(t) + shift)
    fam = SymmetricFamily(family.times, family.samples + shift, family.n, family.with_rotation, func)
    return cz_index(fundamental_solution(fam, steps), **kwargs)


# -- unitary loops -----------------------------------------------------------

def realify(c: np.ndarray) -> np.ndarray:
    """``X + iY -> [[X, -Y], [Y, X]]``."""
    x, y = c.real, c.imag
    return np.block([[x, -y], [y, x]])


def complexify(m: np.ndarray) -> np.ndarray:
    n = m.shape[0] // 2
    return m[:n, :n] + 1j * m[n:, :n]


def unitary_loop_degree(samples, tol: float = 1e-8) -> int:
    """``2 deg det(X + iY)`` for a closed loop of unitary symplectic matrices."""
    samples = np.asarray(samples, dtype=float)
    if np.abs(samples[0] - samples[-1]).max() > 1e-8:
        raise NumericsError("loop is not closed")
    n2 = samples.shape[1]
    eye = np.eye(n2)
    j = J0(n2 // 2)
    if max(np.abs(m.T @ m - eye).max() for m in samples) > tol:
        raise NumericsError("loop samples are not orthogonal")
    if max(np.abs(m @ j - j @ m).max() for m in samples) > tol:
        raise NumericsError("loop samples do not commute with J0")
    dets = np.array([np.linalg.det(complexify(m)) for m in samples])
    if np.min(np.abs(dets)) < 0.5:
        raise NumericsError("complex determinant passes near zero")
    phase = np.unwrap(np.angle(dets))
    if np.max(np.abs(np.diff(phase))) > 1.0:
        raise NumericsError("loop is sampled too coarsely to follow the determinant")
    return 2 * int(round((phase[-1] - phase[0]) / (2.0 * np.pi)))


def unitary_loop(w: np.ndarray, degrees) -> tuple[Callable, Callable]:
    """``Theta(t) = W diag(exp(2 pi i d_j t)) W^*`` (realified) and its derivative."""
    w = np.asarray(w, dtype=complex)
    d = np.asarray(degrees, dtype=float)

    def theta(t):
        return realify(w @ np.diag(np.exp(2j * np.pi * d * t)) @ w.conj().T)

    def dtheta(t):
        return realify(w @ np.diag(2j * np.pi * d * np.exp(2j * np.pi * d * t)) @ w.conj().T)

    return theta, dtheta


def loop_product_path(theta: Callable, dtheta: Callable, path: SymplecticPath) -> SymplecticPath:
    """The path ``Theta Psi`` with generator ``J0 Theta' Theta^{-1} + Theta^{-T} S Theta^{-1}``."""
    j = J0(path.n)

    def gen(t):
        th = theta(t)
        inv = np.linalg.inv(th)
        s = j @ dtheta(t) @ inv + inv.T @ path.generator_at(t) @ inv
        return 0.5 * (s + s.T)

    return path_from_functions(lambda t: theta(t) @ path.at(t), gen, len(path.times) - 1)
