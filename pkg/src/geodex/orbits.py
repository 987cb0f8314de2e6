"""1-periodic Hamiltonian orbits by shooting on the time-1 map.

Phase space is ``T*M`` in natural chart coordinates ``z = (x, y)`` with
Hamiltonian ``H = |y|^2 / 2 + V(t, x)``.  Critical points of the action are
fixed points of ``D^{-1} o phi_1`` where ``D`` is the deck transformation of
the loop's lift.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, ConvergenceError, DegeneracyError, ParameterError
from .geometry import Deck, ManifoldModel, Potential

DEFAULT_STEPS = 2048


def J0(n: int) -> np.ndarray:
    """Standard complex structure ``[[0, -1], [1, 0]]`` on R^{2n}."""
    out = np.zeros((2 * n, 2 * n))
    out[:n, n:] = -np.eye(n)
    out[n:, :n] = np.eye(n)
    return out


def symplectic_defect(m: np.ndarray) -> float:
    n = m.shape[0] // 2
    j = J0(n)
    return float(np.max(np.abs(m.T @ j @ m - j)))


def hamiltonian_rhs(model: ManifoldModel, pot: Potential, t: float, z) -> np.ndarray:
    """Ordinary time derivative of ``z = (x, y)`` in natural coordinates.

    ``x' = g^{-1} y`` and ``y'_l = -1/2 y . (d_l g^{-1}) y - d_l V``; the
    metric-derivative term is the Christoffel correction of the covariant
    equation ``nabla_t y = -g grad V``.
    """
    n = model.n
    x, y = z[:n], z[n:]
    grad = pot.gradient(t, x)
    if model.kind == "sphere2":
        ydot = -0.5 * np.einsum("i,lij,j->l", y, model.inverse_metric_d1(x), y) - grad
        return np.concatenate([model.inverse_metric(x) @ y, ydot])
    return np.concatenate([y, -grad])


def hamiltonian_jacobian(model: ManifoldModel, pot: Potential, t: float, z) -> np.ndarray:
    n = model.n
    x, y = z[:n], z[n:]
    hess = pot.hessian(t, x)
    jac = np.zeros((2 * n, 2 * n))
    if model.kind == "sphere2":
        d1 = model.inverse_metric_d1(x)
        d2 = model.inverse_metric_d2(x)
        jac[:n, :n] = np.einsum("mij,j->im", d1, y)
        jac[:n, n:] = model.inverse_metric(x)
        jac[n:, :n] = -0.5 * np.einsum("i,mlij,j->lm", y, d2, y) - hess
        jac[n:, n:] = -np.einsum("lij,j->li", d1, y)
    else:
        jac[:n, n:] = np.eye(n)
        jac[n:, :n] = -hess
    return jac


@dataclass(frozen=True, eq=False)
class Monodromy:
    """Linearised time-1 map ``d phi_1(z_0)`` in natural coordinates."""

    matrix: np.ndarray
    gap: float
    defect: float


def _flow(model, pot, z0, steps, store=False, variational=True):
    n2 = len(z0)
    h = 1.0 / steps
    z = np.array(z0, dtype=float)
    m = np.eye(n2)
    traj = [z.copy()] if store else None

    def f(t, z):
        return hamiltonian_rhs(model, pot, t, z)

    for k in range(steps):
        t = k * h
        if variational:
            a1 = hamiltonian_jacobian(model, pot, t, z)
        k1 = f(t, z)
        z2 = z + 0.5 * h * k1
        k2 = f(t + 0.5 * h, z2)
        z3 = z + 0.5 * h * k2
        k3 = f(t + 0.5 * h, z3)
        z4 = z + h * k3
        k4 = f(t + h, z4)
        if variational:
            a2 = hamiltonian_jacobian(model, pot, t + 0.5 * h, z2)
            a3 = hamiltonian_jacobian(model, pot, t + 0.5 * h, z3)
            a4 = hamiltonian_jacobian(model, pot, t + h, z4)
            m1 = a1 @ m
            m2 = a2 @ (m + 0.5 * h * m1)
            m3 = a3 @ (m + 0.5 * h * m2)
            m4 = a4 @ (m + h * m3)
            m = m + (h / 6.0) * (m1 + 2 * m2 + 2 * m3 + m4)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if store:
            traj.append(z.copy())
    return z, m, (np.array(traj) if store else None)


def flow_time1(model: ManifoldModel, pot: Potential, z0, steps: int = DEFAULT_STEPS,
               defect_bound: float = 1e-8, deck: Deck | None = None):
    """RK4 time-1 map and its linearisation.

    Returns ``(z(1), Monodromy)``.  The monodromy gap is
    ``|det(1 - D_*^{-1} d phi_1)|``, which reduces to ``|det(1 - d phi_1)|``
    for contractible lifts.
    """
    z1, m, _ = _flow(model, pot, np.asarray(z0, dtype=float), steps)
    defect = symplectic_defect(m)
    if defect > defect_bound:
        raise AccuracyError(
            f"monodromy symplecticity defect {defect:.3g} exceeds {defect_bound:.1g}; "
            "increase the step count")
    dm = m if deck is None else deck.inverse().phase_matrix() @ m
    gap = abs(np.linalg.det(np.eye(len(z1)) - dm))
    return z1, Monodromy(m, float(gap), defect)


@dataclass(frozen=True, eq=False)
class PerturbedOrbit:
    """A 1-periodic solution sampled at ``steps + 1`` uniform times."""

    times: np.ndarray
    z: np.ndarray
    xdot: np.ndarray
    deck: Deck
    residual: float
    monodromy: Monodromy
    action: float = float("nan")
    action_hamiltonian: float = float("nan")
    newton_iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.z.shape[1] // 2

    @property
    def x(self) -> np.ndarray:
        return self.z[:, : self.n]

    @property
    def y(self) -> np.ndarray:
        return self.z[:, self.n:]

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def z0(self) -> np.ndarray:
        return self.z[0]


def _shooting_residual(deck: Deck, z0, z1) -> np.ndarray:
    return deck.inverse().apply_phase(z1) - z0


def integrate_orbit(model: ManifoldModel, pot: Potential, z0, deck: Deck | None = None,
                    steps: int = DEFAULT_STEPS, defect_bound: float = 1e-8) -> PerturbedOrbit:
    """Sample the trajectory through ``z0`` without any Newton correction."""
    if steps % 2:
        raise ParameterError("orbit step count must be even")
    deck = Deck.identity(model.n) if deck is None else deck
    z0 = np.asarray(z0, dtype=float)
    z1, m, traj = _flow(model, pot, z0, steps, store=True)
    defect = symplectic_defect(m)
    if defect > defect_bound:
        raise AccuracyError(f"monodromy symplecticity defect {defect:.3g} exceeds {defect_bound:.1g}")
    dm = deck.inverse().phase_matrix() @ m
    mono = Monodromy(m, float(abs(np.linalg.det(np.eye(len(z0)) - dm))), defect)
    times = np.linspace(0.0, 1.0, steps + 1)
    n = model.n
    xdot = np.array([model.inverse_metric(z[:n]) @ z[n:] for z in traj])
    orbit = PerturbedOrbit(times, traj, xdot, deck,
                           float(np.linalg.norm(_shooting_residual(deck, z0, z1))), mono)
    lag, ham = action_of(model, pot, orbit)
    return PerturbedOrbit(times, traj, xdot, deck, orbit.residual, mono, lag, ham)


def find_orbit(model: ManifoldModel, pot: Potential, seed, deck: Deck | None = None,
               steps: int = DEFAULT_STEPS, tol: float = 1e-10, max_iter: int = 40,
               degeneracy_tol: float = 1e-8) -> PerturbedOrbit:
    """Damped Newton on ``F(z) = D^{-1}(phi_1(z)) - z``.

    The Jacobian ``D_*^{-1} d phi_1 - 1`` comes from the variational equation.
    Raises :class:`DegeneracyError` when ``|det|`` drops below
    ``degeneracy_tol`` and :class:`ConvergenceError` after ``max_iter`` steps.
    """
    deck = Deck.identity(model.n) if deck is None else deck
    dinv = deck.inverse().phase_matrix()
    z = np.asarray(seed, dtype=float).copy()
    eye = np.eye(len(z))

    def residual(zz):
        z1, m, _ = _flow(model, pot, zz, steps)
        return _shooting_residual(deck, zz, z1), m

    f, m = residual(z)
    norm = np.linalg.norm(f)
    for it in range(max_iter + 1):
        jac = dinv @ m - eye
        det = np.linalg.det(jac)
        if abs(det) < degeneracy_tol:
            raise DegeneracyError(
                f"shooting Jacobian is singular (|det(1 - d phi_1)| = {abs(det):.3g}); "
                "the orbit is degenerate or lies in a continuous family")
        if norm <= tol:
            orbit = integrate_orbit(model, pot, z, deck, steps)
            return PerturbedOrbit(orbit.times, orbit.z, orbit.xdot, deck, orbit.residual,
                                  orbit.monodromy, orbit.action, orbit.action_hamiltonian,
                                  newton_iterations=it)
        if it == max_iter:
            break
        step = np.linalg.solve(jac, -f)
        alpha = 1.0
        while True:
            z_try = z + alpha * step
            f_try, m_try = residual(z_try)
            n_try = np.linalg.norm(f_try)
            if n_try < (1.0 - 0.25 * alpha) * norm or alpha < 1e-3:
                break
            alpha *= 0.5
        z, f, m, norm = z_try, f_try, m_try, n_try
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {norm:.3g})")


def action_of(model: ManifoldModel, pot: Potential, orbit: PerturbedOrbit) -> tuple[float, float]:
    """Action in Lagrangian and in Hamiltonian form (trapezoidal rule).

    For a periodic integrand the trapezoidal rule is spectrally accurate.
    """
    n = model.n
    lag = np.empty(len(orbit.times))
    ham = np.empty(len(orbit.times))
    for k, (t, z, v) in enumerate(zip(orbit.times, orbit.z, orbit.xdot)):
        x, y = z[:n], z[n:]
        g = model.metric(x)
        vt = pot.value(t, x)
        lag[k] = 0.5 * v @ g @ v - vt
        ham[k] = y @ v - (0.5 * y @ model.inverse_metric(x) @ y + vt)
    return float(np.trapezoid(lag, orbit.times)), float(np.trapezoid(ham, orbit.times))


def kinetic_l2(model: ManifoldModel, orbit: PerturbedOrbit) -> float:
    """``int_0^1 |x'|^2 dt``."""
    n = model.n
    vals = [v @ model.metric(z[:n]) @ v for z, v in zip(orbit.z, orbit.xdot)]
    return float(np.trapezoid(vals, orbit.times))


def action_bound_holds(model: ManifoldModel, pot: Potential, orbit: PerturbedOrbit,
                       tol: float = 1e-9) -> bool:
    """A-priori bound ``||x'||_{L^2}^2 <= 2 S_V(x) + 2 ||V||_inf``."""
    if pot.sup_norm is None:
        raise ParameterError("potential has no sup-norm")
    return kinetic_l2(model, orbit) <= 2.0 * orbit.action + 2.0 * pot.sup_norm + tol


def seed_grid(lo, hi, counts, momenta=None) -> list[np.ndarray]:
    """Cartesian lattice of initial conditions.

    ``lo``, ``hi``, ``counts`` describe the base points; every base point is
    combined with each covector in ``momenta`` (default: zero covector).
    """
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    axes = [np.linspace(a, b, int(c), endpoint=False) if c > 1 else np.array([a])
            for a, b, c in zip(lo, hi, counts)]
    momenta = [np.zeros(len(lo))] if momenta is None else [np.asarray(p, dtype=float) for p in momenta]
    seeds = []
    for point in np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(lo), -1).T:
        for p in momenta:
            seeds.append(np.concatenate([point, p]))
    return seeds


def deduplicate(model: ManifoldModel, orbits, tol: float = 1e-6):
    """Drop orbits whose normalised initial points are within ``tol``.

    The survivors are sorted lexicographically by their normalised initial
    point so that orbit numbering does not depend on seed order.
    """
    keyed = []
    for orb in orbits:
        zn, _ = model.normalize(orb.z0)
        zn = np.where(np.abs(zn - np.round(zn)) < tol, np.round(zn), zn)
        if model.kind != "sphere2":
            zn[: model.n] = np.mod(zn[: model.n], 1.0)
        else:
            zn[1] = np.mod(zn[1], 2 * np.pi)
        if any(np.linalg.norm(zn - k) < tol and np.allclose(orb.deck.matrix, o.deck.matrix)
               for k, o in keyed):
            continue
        keyed.append((zn, orb))
    keyed.sort(key=lambda item: tuple(np.round(item[0], 9)))
    return [o for _, o in keyed]
