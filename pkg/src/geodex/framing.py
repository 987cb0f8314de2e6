"""Orthonormal trivialisations along an orbit and the matrix families built on them.

A frame is stored in chart components: ``phi[k]`` has the chart components of
``e_1(t_k), ..., e_n(t_k)`` as columns and satisfies ``phi^T g phi = 1``.  For a
lifted loop with deck map ``x -> A x + c`` the closing condition reads
``phi(1) = A phi(0) E_sigma``; after identifying the fibres at ``x(0)`` and
``x(1) = D(x(0))`` through ``A`` this is the relation ``phi(1) = phi(0) E_sigma``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.linalg import expm, schur

from .errors import AssemblyError, FrameError, ParameterError
from .geometry import ManifoldModel, Potential
from .orbits import J0, PerturbedOrbit
from .symplectic import (SymmetricFamily, fundamental_solution, rotation_U,
                         twisted_generator)

__all__ = [
    "RawFrame", "ClosedFrame", "Coefficients", "SymmetricFamily", "parallel_frame",
    "detect_sigma", "twist_matrix", "rotation_log", "smoothstep", "close_frame",
    "assemble_Q", "assemble_SU", "frame_for_orbit", "linearized_flow_in_frame",
]

DEFAULT_MARGIN = 0.1


def twist_matrix(n: int, sigma: int) -> np.ndarray:
    """``E_sigma = diag((-1)^sigma, 1, ..., 1)``."""
    e = np.eye(n)
    e[0, 0] = -1.0 if sigma else 1.0
    return e


# -- smooth ramp ------------------------------------------------------------

def smoothstep(t, margin: float = DEFAULT_MARGIN, derivative: int = 0):
    """Ramp ``0 -> 1`` that is constant on ``[0, margin]`` and ``[1 - margin, 1]``.

    In between it is ``6u^5 - 15u^4 + 10u^3`` with ``u = (t - margin)/(1 - 2 margin)``.
    ``derivative`` selects the value (0), first (1) or second (2) derivative.
    """
    if not 0.0 <= margin < 0.5:
        raise ParameterError("ramp margin must lie in [0, 0.5)")
    w = 1.0 - 2.0 * margin
    u = np.clip((np.asarray(t, dtype=float) - margin) / w, 0.0, 1.0)
    if derivative == 0:
        out = u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)
    elif derivative == 1:
        out = 30.0 * u * u * (1.0 - u) ** 2 / w
    elif derivative == 2:
        out = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / w ** 2
    else:
        raise ParameterError("derivative must be 0, 1 or 2")
    return out if out.ndim else float(out)


# -- coefficient data -------------------------------------------------------

def _grid_lookup(samples: np.ndarray, t: float) -> np.ndarray:
    """Sample at a grid node; linear interpolation elsewhere."""
    m = len(samples) - 1
    s = t * m
    k = int(round(s))
    if abs(s - k) < 1e-9 and 0 <= k <= m:
        return samples[k]
    k = int(np.clip(np.floor(s), 0, m - 1))
    w = s - k
    return (1.0 - w) * samples[k] + w * samples[k + 1]


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Data ``(Q, P, sigma)`` of the operator ``-(d/dt + P)^2 - Q`` on twisted loops.

    ``q``, ``p`` and ``dp`` are callables of ``t``.  When ``grid`` is set, ``q``
    is exact only at the nodes ``j / grid``; consumers then restrict themselves
    to grids dividing ``grid``.
    """

    n: int
    sigma: int
    q: Callable[[float], np.ndarray]
    p: Callable[[float], np.ndarray]
    dp: Callable[[float], np.ndarray]
    grid: int | None = None

    @property
    def twist(self) -> np.ndarray:
        return twist_matrix(self.n, self.sigma)

    def S(self, t: float) -> np.ndarray:
        """``[[Q, P], [-P, 1]]``."""
        q, p = self.q(t), self.p(t)
        return np.block([[q, p], [-p, np.eye(self.n)]])

    def S_U(self, t: float, power: int = 1) -> np.ndarray:
        return twisted_generator(self.S(t), t, self.sigma, power)

    def boundary_defect(self) -> float:
        e = self.twist
        return max(np.abs(self.q(1.0) - e @ self.q(0.0) @ e).max(),
                   np.abs(self.p(1.0) - e @ self.p(0.0) @ e).max())

    def family(self, twisted: bool = True, power: int = 1, steps: int | None = None) -> SymmetricFamily:
        """Sampled generator family, ``S_U`` if ``twisted`` else ``S``."""
        def gen(t):
            return self.S_U(t, power) if twisted else self.S(t)
        if self.grid is not None:
            m = self.grid if steps is None else 2 * steps
            if self.grid % m:
                raise ParameterError(f"{2 * steps} samples do not divide the coefficient grid")
            times = np.linspace(0.0, 1.0, m + 1)
            return SymmetricFamily(times, np.array([gen(t) for t in times]), self.n, twisted)
        return SymmetricFamily.from_function(gen, self.n, steps or 2048, twisted)

    def fundamental_solution(self, twisted: bool = True, power: int = 1, steps: int | None = None,
                             bound: float = 1e-8):
        fam = self.family(twisted, power, steps)
        return fundamental_solution(fam, None if self.grid is not None else (steps or 2048), bound)


# -- frames -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RawFrame:
    """Parallel frame along a lifted orbit, before closing."""

    times: np.ndarray
    phi: np.ndarray
    deck_matrix: np.ndarray
    holonomy: np.ndarray
    orthonormality_defect: float


@dataclass(frozen=True, eq=False)
class ClosedFrame:
    """Frame with ``phi(1) = A phi(0) E_sigma`` and its coefficient families."""

    times: np.ndarray
    phi: np.ndarray
    sigma: int
    E: np.ndarray
    P: np.ndarray
    log_rotation: np.ndarray
    margin: float
    holonomy: np.ndarray
    deck_matrix: np.ndarray
    Q: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    def p_at(self, t: float) -> np.ndarray:
        return smoothstep(t, self.margin, 1) * self.log_rotation

    def dp_at(self, t: float) -> np.ndarray:
        return smoothstep(t, self.margin, 2) * self.log_rotation

    def rotation_at(self, t: float) -> np.ndarray:
        return expm(smoothstep(t, self.margin) * self.log_rotation)

    def coefficients(self) -> Coefficients:
        if self.Q is None:
            raise AssemblyError("frame has no Q block; call assemble_Q first")
        q = self.Q
        return Coefficients(self.n, self.sigma, lambda t: _grid_lookup(q, t), self.p_at,
                            self.dp_at, grid=len(q) - 1)


def _g_orthonormalize(phi: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Nearest g-orthonormal frame (polar factor in the g inner product)."""
    w, v = np.linalg.eigh(g)
    root = (v * np.sqrt(w)) @ v.T
    iroot = (v / np.sqrt(w)) @ v.T
    u, _, vt = np.linalg.svd(root @ phi)
    return iroot @ (u @ vt)


def parallel_frame(model: ManifoldModel, orbit: PerturbedOrbit,
                   initial_rotation: np.ndarray | None = None) -> RawFrame:
    """Solve ``phi' + Gamma(x') phi = 0`` by RK4 along the sampled orbit.

    Midpoint positions and velocities come from cubic Hermite interpolation
    of the samples.  The frame is re-orthonormalised after every step.
    """
    n = model.n
    times = orbit.times
    x, v = orbit.x, orbit.xdot
    phi0 = model.orthonormal_basis(x[0])
    if initial_rotation is not None:
        w = np.asarray(initial_rotation, dtype=float)
        if np.abs(w.T @ w - np.eye(n)).max() > 1e-10:
            raise ParameterError("initial rotation must be orthogonal")
        phi0 = phi0 @ w
    phi = np.empty((len(times), n, n))
    phi[0] = phi0
    if model.kind == "sphere2":
        def a(xx, vv):
            return -np.einsum("kij,i->kj", model.christoffel(xx), vv)
        for k in range(len(times) - 1):
            h = times[k + 1] - times[k]
            xm = 0.5 * (x[k] + x[k + 1]) + 0.125 * h * (v[k] - v[k + 1])
            vm = 1.5 * (x[k + 1] - x[k]) / h - 0.25 * (v[k] + v[k + 1])
            a1, am, a4 = a(x[k], v[k]), a(xm, vm), a(x[k + 1], v[k + 1])
            m = phi[k]
            k1 = a1 @ m
            k2 = am @ (m + 0.5 * h * k1)
            k3 = am @ (m + 0.5 * h * k2)
            k4 = a4 @ (m + h * k3)
            phi[k + 1] = _g_orthonormalize(m + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4),
                                           model.metric(x[k + 1]))
    else:
        phi[:] = phi0
    defect = max(np.abs(p.T @ model.metric(xx) @ p - np.eye(n)).max() for p, xx in zip(phi, x))
    amat = orbit.deck.matrix
    hol = phi[0].T @ model.metric(x[0]) @ np.linalg.solve(amat, phi[-1])
    return RawFrame(times, phi, amat, hol, float(defect))


def detect_sigma(h: np.ndarray, tol: float = 1e-6) -> int:
    """0 if ``det h > 0`` else 1."""
    d = float(np.linalg.det(np.asarray(h, dtype=float)))
    if abs(abs(d) - 1.0) > tol:
        raise FrameError(f"holonomy is not orthogonal (det = {d:.6g})")
    return 0 if d > 0 else 1


def rotation_log(r: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Real skew logarithm of a rotation matrix.

    Uses the real Schur form; eigenvalues ``-1`` (which come in pairs for
    ``det r = 1``) are grouped into half-turn blocks.
    """
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    if abs(np.linalg.det(r) - 1.0) > 1e-6:
        raise FrameError("closing rotation is not in SO(n)")
    t, z = schur(r, output="real")
    log_t = np.zeros((n, n))
    minus = []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > tol:
            ang = np.arctan2(0.5 * (t[i + 1, i] - t[i, i + 1]), 0.5 * (t[i, i] + t[i + 1, i + 1]))
            log_t[i + 1, i], log_t[i, i + 1] = ang, -ang
            i += 2
        else:
            if t[i, i] < 0:
                minus.append(i)
            i += 1
    if len(minus) % 2:
        raise FrameError("odd number of eigenvalues -1; no real logarithm")
    for a, b in zip(minus[::2], minus[1::2]):
        log_t[b, a], log_t[a, b] = np.pi, -np.pi
    out = z @ log_t @ z.T
    out = 0.5 * (out - out.T)
    if np.abs(expm(out) - r).max() > 1e-8:
        raise FrameError("matrix logarithm failed to reproduce the closing rotation")
    return out


def close_frame(raw: RawFrame, holonomy: np.ndarray | None = None, sigma: int | None = None,
                margin: float = DEFAULT_MARGIN, extra_turns: int = 0) -> ClosedFrame:
    """Close a parallel frame with a ramped rotation ``rho(t) = exp(beta(t) L)``.

    ``L = log(h^{-1} E_sigma)`` so that ``phi = phi_par rho`` satisfies the
    closing condition.  ``P = rho^{-1} rho' = beta' L`` vanishes near the ends.
    ``extra_turns`` (``n = 2`` only) adds whole turns to ``L``; the endpoint is
    unchanged while the frame differs by a non-trivial loop.
    """
    h = raw.holonomy if holonomy is None else np.asarray(holonomy, dtype=float)
    s = detect_sigma(h) if sigma is None else int(sigma)
    n = h.shape[0]
    e = twist_matrix(n, s)
    if np.linalg.det(h @ e) <= 0:
        raise FrameError("sigma is inconsistent with the holonomy")
    log_r = rotation_log(h.T @ e)
    if extra_turns:
        if n != 2:
            raise ParameterError("extra_turns is only available for n = 2")
        log_r = log_r + 2.0 * np.pi * extra_turns * np.array([[0.0, -1.0], [1.0, 0.0]])
    beta = smoothstep(raw.times, margin)
    phi = np.array([p @ expm(b * log_r) for p, b in zip(raw.phi, beta)])
    dbeta = smoothstep(raw.times, margin, 1)
    pmat = dbeta[:, None, None] * log_r[None]
    return ClosedFrame(raw.times, phi, s, e, pmat, log_r, margin, h, raw.deck_matrix)


def _point_operator(model: ManifoldModel, pot: Potential, t: float, x, v) -> np.ndarray:
    """Chart matrix of ``xi -> R(xi, v) v + nabla_xi grad V``."""
    grad = pot.gradient(t, x)
    hess = pot.hessian(t, x)
    ginv = model.inverse_metric(x)
    cov = hess - np.einsum("kij,k->ij", model.christoffel(x), grad)
    return model.curvature_matrix(x, v) + ginv @ cov


def assemble_Q(model: ManifoldModel, pot: Potential, orbit: PerturbedOrbit,
               frame: ClosedFrame, tol: float = 1e-8) -> np.ndarray:
    """``Q = phi^{-1}(R(phi ., x') x' + nabla_{phi .} grad V)`` at every orbit sample."""
    out = np.empty((len(orbit.times), model.n, model.n))
    for k, (t, x, v, phi) in enumerate(zip(orbit.times, orbit.x, orbit.xdot, frame.phi)):
        q = phi.T @ model.metric(x) @ _point_operator(model, pot, t, x, v) @ phi
        if np.abs(q - q.T).max() > tol * (1.0 + np.abs(q).max()):
            raise AssemblyError(f"Q is not symmetric at t = {t:.6g}")
        out[k] = 0.5 * (q + q.T)
    e = frame.E
    if np.abs(out[-1] - e @ out[0] @ e).max() > tol * (1.0 + np.abs(out).max()):
        raise AssemblyError("Q violates the twisted boundary relation Q(1) = E Q(0) E")
    return out


def assemble_SU(frame: ClosedFrame, Q: np.ndarray | None = None, power: int = 1,
                steps: int | None = None) -> tuple[SymmetricFamily, SymmetricFamily]:
    """Sampled families ``S`` and ``S_U`` (with ``U`` raised to ``power``)."""
    if Q is not None:
        frame = replace(frame, Q=np.asarray(Q, dtype=float))
    coef = frame.coefficients()
    return coef.family(False, power, steps), coef.family(True, power, steps)


def frame_for_orbit(model: ManifoldModel, pot: Potential, orbit: PerturbedOrbit,
                    margin: float = DEFAULT_MARGIN, initial_rotation=None,
                    extra_turns: int = 0) -> ClosedFrame:
    """Parallel frame, closing rotation and ``Q`` in one call."""
    raw = parallel_frame(model, orbit, initial_rotation)
    frame = close_frame(raw, margin=margin, extra_turns=extra_turns)
    return replace(frame, Q=assemble_Q(model, pot, orbit, frame))


def linearized_flow_in_frame(model: ManifoldModel, orbit: PerturbedOrbit, frame: ClosedFrame,
                             power: int = 1) -> np.ndarray:
    """Monodromy expressed in the unitary frame: ``U(1)^sigma Phi(1)^{-1} d phi_1 Phi(0)``.

    ``Phi(t)`` maps frame coordinates ``(xi, eta)`` to natural variations
    ``(dx, dy)``; the covector part carries the Christoffel correction
    ``dy -> dy - Gamma(., .)y dx``.
    """
    n = model.n

    def frame_map(k):
        x, y, phi = orbit.x[k], orbit.y[k], frame.phi[k]
        corr = np.einsum("kil,k->li", model.christoffel(x), y)
        c = np.block([[np.eye(n), np.zeros((n, n))], [-corr, np.eye(n)]])
        inv_phi = np.block([[phi.T @ model.metric(x), np.zeros((n, n))],
                            [np.zeros((n, n)), phi.T]])
        return inv_phi @ c

    m = orbit.monodromy.matrix
    psi1 = frame_map(-1) @ m @ np.linalg.inv(frame_map(0))
    if frame.sigma:
        psi1 = rotation_U(1.0, n, power) @ psi1
    return psi1


def symplectic_form_defect(m: np.ndarray) -> float:
    j = J0(m.shape[0] // 2)
    return float(np.abs(m.T @ j @ m - j).max())
