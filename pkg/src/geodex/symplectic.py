"""Fundamental solutions of ``Psi' = -J0 S(t) Psi`` and related paths in Sp(2n)."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm, polar

from .errors import AccuracyError, ParameterError
from .orbits import J0, symplectic_defect

DEFAULT_PATH_STEPS = 2048


def rotation_U(t: float, n: int, power: int = 1) -> np.ndarray:
    """Rotation of the (1, n+1) coordinate plane by ``power * pi * t``."""
    u = np.eye(2 * n)
    c, s = np.cos(power * np.pi * t), np.sin(power * np.pi * t)
    u[0, 0] = u[n, n] = c
    u[0, n] = -s
    u[n, 0] = s
    return u


def twist_projection(n: int) -> np.ndarray:
    """Projection onto coordinates 1 and n+1."""
    p = np.zeros((2 * n, 2 * n))
    p[0, 0] = p[n, n] = 1.0
    return p


def twisted_generator(s: np.ndarray, t: float, sigma: int, power: int = 1) -> np.ndarray:
    """``U^s S U^{-s} - J0 U^s d/dt(U^{-s})`` with ``U`` raised to ``power``.

    The second term is the constant ``-power * pi * Pi_{1,n+1}``.
    """
    if sigma == 0:
        return s
    n = s.shape[0] // 2
    u = rotation_U(t, n, power)
    return u @ s @ u.T - power * np.pi * twist_projection(n)


@dataclass(frozen=True, eq=False)
class SymmetricFamily:
    """Sampled family ``t -> S(t)`` of symmetric ``2n x 2n`` matrices.

    ``func`` (optional) evaluates the family exactly between samples; without
    it the family is interpolated linearly.
    """

    times: np.ndarray
    samples: np.ndarray
    n: int
    with_rotation: bool = False
    func: Callable[[float], np.ndarray] | None = None

    def at(self, t: float) -> np.ndarray:
        if self.func is not None:
            return self.func(t)
        return _interp(self.times, self.samples, t)

    @classmethod
    def from_function(cls, func, n: int, steps: int = DEFAULT_PATH_STEPS, with_rotation=False):
        times = np.linspace(0.0, 1.0, steps + 1)
        return cls(times, np.array([func(t) for t in times]), n, with_rotation, func)


def _interp(times, values, t):
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    t0, t1 = times[k], times[k + 1]
    w = (t - t0) / (t1 - t0)
    if w == 0.0:
        return values[k]
    if w == 1.0:
        return values[k + 1]
    return (1.0 - w) * values[k] + w * values[k + 1]


@dataclass(frozen=True, eq=False)
class SymplecticPath:
    """Sampled path ``Psi(t_k)`` with its generator ``S = J0 Psi' Psi^{-1}``."""

    times: np.ndarray
    psi: np.ndarray
    generator: np.ndarray
    defect: float
    psi_fn: Callable[[float], np.ndarray] | None = None
    gen_fn: Callable[[float], np.ndarray] | None = None

    @property
    def n(self) -> int:
        return self.psi.shape[1] // 2

    @property
    def end(self) -> np.ndarray:
        return self.psi[-1]

    def restrict(self, start: int, stop: int) -> "SymplecticPath":
        """Sub-path on the grid nodes ``start..stop`` (inclusive)."""
        sl = slice(start, stop + 1)
        return SymplecticPath(self.times[sl], self.psi[sl], self.generator[sl], self.defect,
                              self.psi_fn, self.gen_fn)

    def generator_at(self, t: float) -> np.ndarray:
        if self.gen_fn is not None:
            return self.gen_fn(t)
        return _interp(self.times, self.generator, t)

    def at(self, t: float) -> np.ndarray:
        """``Psi(t)`` off the grid: exact if ``psi_fn`` is known, else RK4 from the node below."""
        if self.psi_fn is not None:
            return self.psi_fn(t)
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1))
        t0 = self.times[k]
        if t == t0:
            return self.psi[k]
        j = J0(self.n)
        m = self.psi[k]
        sub = 8
        h = (t - t0) / sub
        for i in range(sub):
            m = _rk4_matrix_step(lambda tt: -j @ self.generator_at(tt), t0 + i * h, h, m)
        return m


def _rk4_matrix_step(a, t, h, m, a_mid=None, a_end=None):
    a1 = a(t)
    am = a(t + 0.5 * h) if a_mid is None else a_mid
    a4 = a(t + h) if a_end is None else a_end
    k1 = a1 @ m
    k2 = am @ (m + 0.5 * h * k1)
    k3 = am @ (m + 0.5 * h * k2)
    k4 = a4 @ (m + h * k3)
    return m + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def fundamental_solution(family: SymmetricFamily, steps: int | None = None,
                         bound: float = 1e-8) -> SymplecticPath:
    """RK4 for ``Psi' = -J0 S Psi``, ``Psi(0) = 1``.

    Midpoint values of ``S`` come from ``family.func`` when present.  For a
    purely sampled family on an even grid of ``2m + 1`` points, ``m`` steps are
    taken and the odd samples serve as exact midpoints; otherwise ``S`` is
    interpolated linearly between samples.
    """
    n = family.n
    j = J0(n)
    nsamp = len(family.times) - 1
    use_mid = False
    if steps is None:
        if family.func is None and nsamp % 2 == 0:
            steps, use_mid = nsamp // 2, True
        else:
            steps = nsamp if family.func is None else DEFAULT_PATH_STEPS
    elif family.func is None and nsamp == 2 * steps:
        use_mid = True
    times = np.linspace(0.0, 1.0, steps + 1)
    h = 1.0 / steps
    psi = np.empty((steps + 1, 2 * n, 2 * n))
    gens = np.empty_like(psi)
    psi[0] = np.eye(2 * n)
    m = psi[0]
    if use_mid:
        for k in range(steps + 1):
            gens[k] = family.samples[2 * k]
        a = -np.einsum("ij,kjl->kil", j, family.samples)
        for k in range(steps):
            m = _rk4_matrix_step(lambda _t, k=k: a[2 * k], 0.0, h, m,
                                 a_mid=a[2 * k + 1], a_end=a[2 * k + 2])
            psi[k + 1] = m
    else:
        for k in range(steps + 1):
            gens[k] = family.at(times[k])
        for k in range(steps):
            m = _rk4_matrix_step(lambda t: -j @ family.at(t), times[k], h, m,
                                 a_end=-j @ gens[k + 1])
            psi[k + 1] = m
    defect = max(symplectic_defect(p) for p in psi)
    if defect > bound:
        raise AccuracyError(f"symplecticity defect {defect:.3g} exceeds {bound:.1g}; use more steps")
    gen_fn = family.func if family.func is not None else (
        lambda t: _interp(family.times, family.samples, t))
    return SymplecticPath(times, psi, gens, defect, gen_fn=gen_fn)


def path_from_functions(psi_fn, gen_fn, steps: int = DEFAULT_PATH_STEPS) -> SymplecticPath:
    """Sample a path known in closed form (``psi_fn``) with generator ``gen_fn``."""
    times = np.linspace(0.0, 1.0, steps + 1)
    psi = np.array([psi_fn(t) for t in times])
    gens = np.array([gen_fn(t) for t in times])
    defect = max(symplectic_defect(p) for p in psi)
    return SymplecticPath(times, psi, gens, defect, psi_fn=psi_fn, gen_fn=gen_fn)


def matrix_exponential_path(s, steps: int = DEFAULT_PATH_STEPS) -> SymplecticPath:
    """``t -> exp(-t J0 S)`` for a constant symmetric ``S`` (scaling and squaring)."""
    s = np.asarray(s, dtype=float)
    if not np.allclose(s, s.T, atol=1e-12):
        raise ParameterError("S must be symmetric")
    a = -J0(s.shape[0] // 2) @ s
    times = np.linspace(0.0, 1.0, steps + 1)
    step = expm(a / steps)
    psi = np.empty((steps + 1,) + a.shape)
    psi[0] = np.eye(a.shape[0])
    # exp(t_k a) by repeated multiplication, re-anchored every 64 steps
    for k in range(1, steps + 1):
        psi[k] = expm(times[k] * a) if k % 64 == 0 else psi[k - 1] @ step
    gens = np.broadcast_to(s, psi.shape)
    defect = float(np.abs(np.einsum("kji,jl,klm->kim", psi, J0(a.shape[0] // 2), psi)
                          - J0(a.shape[0] // 2)).max())
    return SymplecticPath(times, psi, gens, defect, psi_fn=lambda t: expm(t * a),
                          gen_fn=lambda t: s)


def hyperbolic_reference(t: float, mu_hat: float, n: int = 1) -> np.ndarray:
    """``exp(-t J0 diag(mu_hat 1, 1))`` for ``mu_hat < 0`` in closed form."""
    kappa = np.sqrt(-mu_hat)
    c, s = np.cosh(t * kappa), np.sinh(t * kappa)
    e = np.eye(n)
    return np.block([[c * e, s / kappa * e], [kappa * s * e, c * e]])


def _rot2(a):
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def gamma1(t: float) -> np.ndarray:
    """``R(pi t) diag(1 + t, 1 / (1 + t))``."""
    return _rot2(np.pi * t) @ np.diag([1.0 + t, 1.0 / (1.0 + t)])


def _gamma1_generator(t):
    a = 1.0 / (1.0 + t)
    r = _rot2(np.pi * t)
    return -np.pi * np.eye(2) + J0(1) @ r @ np.diag([a, -a]) @ r.T


def gamma1_path(steps: int = DEFAULT_PATH_STEPS) -> SymplecticPath:
    return path_from_functions(gamma1, _gamma1_generator, steps)


def _check_mu_hat(mu_hat):
    if not mu_hat < -np.pi:
        raise ParameterError(f"need mu_hat < -pi (kappa > sqrt(pi)), got {mu_hat}")


def gamma2_generator(t: float, mu_hat: float) -> np.ndarray:
    """``b(t) = u s u^{-1} - pi 1`` with ``u = R(pi t)``, ``s = diag(mu_hat, 1)``."""
    u = _rot2(np.pi * t)
    return u @ np.diag([mu_hat, 1.0]) @ u.T - np.pi * np.eye(2)


def gamma2_path(mu_hat: float, steps: int = DEFAULT_PATH_STEPS) -> SymplecticPath:
    """Integrate ``gamma2' = -J0 b(t) gamma2`` from the identity."""
    _check_mu_hat(mu_hat)
    fam = SymmetricFamily.from_function(lambda t: gamma2_generator(t, mu_hat), 1, steps,
                                        with_rotation=True)
    return fundamental_solution(fam, steps)


def gamma2_closed_form(t: float, mu_hat: float) -> np.ndarray:
    """``u(t) exp(-t J0 diag(mu_hat, 1))``."""
    return _rot2(np.pi * t) @ hyperbolic_reference(t, mu_hat)


def f_gamma2(t, kappa):
    """``det(1 - gamma2(t)) = 2 - 2 cos(pi t) cosh(kappa t) + (kappa - 1/kappa) sin(pi t) sinh(kappa t)``."""
    t = np.asarray(t, dtype=float)
    return (2.0 - 2.0 * np.cos(np.pi * t) * np.cosh(kappa * t)
            + (kappa - 1.0 / kappa) * np.sin(np.pi * t) * np.sinh(kappa * t))


def torus_coords(m) -> tuple[float, float, float]:
    """Solid-torus coordinates of ``m`` in Sp(2).

    Polar decomposition ``m = R(theta) P`` with ``P`` positive symmetric
    symplectic; ``log P = [[u, v], [v, -u]]``.  Returns ``(theta, u, v)`` with
    ``theta`` in ``(-pi, pi]``.
    """
    m = np.asarray(m, dtype=float)
    rot, p = polar(m, side="right")
    theta = np.arctan2(rot[1, 0], rot[0, 0])
    w, vecs = np.linalg.eigh(p)
    logp = vecs @ np.diag(np.log(w)) @ vecs.T
    return float(theta) + 0.0, float(logp[0, 0]) + 0.0, float(logp[0, 1]) + 0.0


def path_torus_coords(psi_samples) -> np.ndarray:
    """``(theta, u, v)`` along a sampled Sp(2) path, ``theta`` unwrapped by nearest branch."""
    coords = np.array([torus_coords(m) for m in psi_samples])
    coords[:, 0] = np.unwrap(coords[:, 0])
    return coords + 0.0


def det_one_minus(psi_samples) -> np.ndarray:
    eye = np.eye(psi_samples.shape[1])
    return np.array([np.linalg.det(eye - m) for m in psi_samples])


def _fmt(x: float) -> str:
    return format(float(x) + 0.0, ".17g")


def write_path_csv(times, psi_samples, fh, dets=None) -> int:
    """Write ``t,theta,u,v,det1m`` rows for an Sp(2) path; returns the row count.

    ``dets`` overrides the ``det(1 - Psi)`` column.
    """
    coords = path_torus_coords(psi_samples)
    dets = det_one_minus(psi_samples) if dets is None else dets
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "theta", "u", "v", "det1m"])
    for t, (th, u, v), d in zip(times, coords, dets):
        writer.writerow([_fmt(t), _fmt(th), _fmt(u), _fmt(v), _fmt(d)])
    return len(times)
