"""Model manifolds and time-periodic potentials, in a single global chart.

Three models are available, each described by one chart together with the
deck group that turns the chart into the manifold:

* ``flat_torus(n)`` -- R^n / Z^n with the Euclidean metric,
* ``flat_klein_bottle()`` -- R^2 / Gamma, Gamma generated by
  ``(x, y) -> (x + 1, -y)`` and ``(x, y) -> (x, y + 1)``,
* ``sphere2(radius)`` -- the round sphere in colatitude/longitude ``(theta, phi)``,
  with ``phi -> phi + 2 pi`` as the only deck generator.

Loops that are not contractible are represented by a lift to the chart plus a
deck transformation ``D`` with ``x(1) = D(x(0))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ParameterError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class Deck:
    """Affine chart isometry ``x -> matrix @ x + shift``."""

    matrix: np.ndarray
    shift: np.ndarray

    @classmethod
    def identity(cls, n: int) -> "Deck":
        return cls(np.eye(n), np.zeros(n))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x):
        return self.matrix @ np.asarray(x, dtype=float) + self.shift

    def compose(self, other: "Deck") -> "Deck":
        """``self o other``."""
        return Deck(self.matrix @ other.matrix, self.matrix @ other.shift + self.shift)

    def inverse(self) -> "Deck":
        inv = np.linalg.inv(self.matrix)
        return Deck(inv, -inv @ self.shift)

    def power(self, k: int) -> "Deck":
        out = Deck.identity(self.n)
        base = self if k >= 0 else self.inverse()
        for _ in range(abs(int(k))):
            out = base.compose(out)
        return out

    def phase_matrix(self) -> np.ndarray:
        """Differential of the induced map on T*M in natural coordinates."""
        n = self.n
        out = np.zeros((2 * n, 2 * n))
        out[:n, :n] = self.matrix
        out[n:, n:] = np.linalg.inv(self.matrix).T
        return out

    def apply_phase(self, z):
        z = np.asarray(z, dtype=float)
        n = self.n
        return np.concatenate([self.apply(z[:n]), np.linalg.solve(self.matrix.T, z[n:])])

    def is_identity(self, tol: float = 1e-12) -> bool:
        return (np.allclose(self.matrix, np.eye(self.n), atol=tol)
                and np.allclose(self.shift, 0.0, atol=tol))

    def to_json(self) -> dict:
        return {"matrix": self.matrix.tolist(), "shift": self.shift.tolist()}


@dataclass(frozen=True, eq=False)
class ManifoldModel:
    """Chart data of one of the model manifolds.

    Only the ``kind`` string and the parameters are stored; all geometric
    quantities are closed-form functions of the chart point.
    """

    kind: str
    n: int
    radius: float = 1.0
    pole_margin: float = 0.05
    generators: tuple = field(default_factory=tuple)

    # -- chart domain ---------------------------------------------------
    def check_domain(self, x) -> None:
        if self.kind == "sphere2":
            theta = float(x[0])
            if not (self.pole_margin < theta < np.pi - self.pole_margin):
                raise DomainError(
                    f"colatitude {theta:.6g} is within {self.pole_margin} rad of a pole")

    # -- metric -----------------------------------------------------------
    def metric(self, x) -> np.ndarray:
        self.check_domain(x)
        if self.kind == "sphere2":
            s = np.sin(x[0])
            return self.radius ** 2 * np.diag([1.0, s * s])
        return np.eye(self.n)

    def inverse_metric(self, x) -> np.ndarray:
        self.check_domain(x)
        if self.kind == "sphere2":
            s = np.sin(x[0])
            return np.diag([1.0, 1.0 / (s * s)]) / self.radius ** 2
        return np.eye(self.n)

    def inverse_metric_d1(self, x) -> np.ndarray:
        """``out[l, i, j] = d_l g^{ij}``."""
        out = np.zeros((self.n, self.n, self.n))
        if self.kind == "sphere2":
            self.check_domain(x)
            s, c = np.sin(x[0]), np.cos(x[0])
            out[0, 1, 1] = -2.0 * c / s ** 3 / self.radius ** 2
        return out

    def inverse_metric_d2(self, x) -> np.ndarray:
        """``out[m, l, i, j] = d_m d_l g^{ij}``."""
        out = np.zeros((self.n,) * 4)
        if self.kind == "sphere2":
            self.check_domain(x)
            s, c = np.sin(x[0]), np.cos(x[0])
            out[0, 0, 1, 1] = (2.0 / s ** 2 + 6.0 * c * c / s ** 4) / self.radius ** 2
        return out

    def christoffel(self, x) -> np.ndarray:
        """``out[k, i, j] = Gamma^k_{ij}`` of the Levi-Civita connection."""
        out = np.zeros((self.n,) * 3)
        if self.kind == "sphere2":
            self.check_domain(x)
            s, c = np.sin(x[0]), np.cos(x[0])
            out[0, 1, 1] = -s * c
            out[1, 0, 1] = out[1, 1, 0] = c / s
        return out

    @property
    def sectional_curvature(self) -> float:
        return 1.0 / self.radius ** 2 if self.kind == "sphere2" else 0.0

    def curvature_term(self, x, xi, v) -> np.ndarray:
        """``R(xi, v) v`` in chart components.

        All three models have constant curvature K, so
        ``R(xi, v) v = K (<v, v> xi - <xi, v> v)``.
        """
        self.check_domain(x)
        k = self.sectional_curvature
        xi = np.asarray(xi, dtype=float)
        v = np.asarray(v, dtype=float)
        if k == 0.0:
            return np.zeros(self.n)
        g = self.metric(x)
        return k * ((v @ g @ v) * xi - (xi @ g @ v) * v)

    def curvature_matrix(self, x, v) -> np.ndarray:
        """Matrix of ``xi -> R(xi, v) v``."""
        k = self.sectional_curvature
        if k == 0.0:
            return np.zeros((self.n, self.n))
        g = self.metric(x)
        v = np.asarray(v, dtype=float)
        return k * ((v @ g @ v) * np.eye(self.n) - np.outer(v, g @ v))

    def orthonormal_basis(self, x) -> np.ndarray:
        """Columns form a g-orthonormal basis of T_x M (chart components)."""
        g = self.metric(x)
        return np.diag(1.0 / np.sqrt(np.diag(g)))

    # -- deck group -------------------------------------------------------
    def deck_from_word(self, word: Sequence[Sequence[int]] | None) -> Deck:
        """Compose generators: ``word = [[index, power], ...]`` applied left to right."""
        out = Deck.identity(self.n)
        for item in word or ():
            index, power = int(item[0]), int(item[1])
            if not 0 <= index < len(self.generators):
                raise ParameterError(f"{self.kind} has no deck generator {index}")
            out = self.generators[index].power(power).compose(out)
        return out

    def normalize(self, z) -> tuple[np.ndarray, Deck]:
        """Move a phase-space point into the fundamental domain.

        Returns ``(G z, G)`` for a deck transformation ``G``.
        """
        n = self.n
        x = np.asarray(z[:n], dtype=float)
        g = Deck.identity(n)
        if self.kind == "flat_torus":
            g = Deck(np.eye(n), -np.floor(x))
        elif self.kind == "flat_klein_bottle":
            a, b = self.generators
            g = a.power(-int(np.floor(x[0])))
            y = g.apply(x)[1]
            g = b.power(-int(np.floor(y))).compose(g)
        elif self.kind == "sphere2":
            g = self.generators[0].power(-int(np.floor(x[1] / TWO_PI)))
        return g.apply_phase(z), g

    def to_json(self) -> dict:
        if self.kind == "flat_torus":
            return {"kind": "flat_torus", "n": self.n}
        if self.kind == "flat_klein_bottle":
            return {"kind": "flat_klein_bottle"}
        return {"kind": "sphere2", "radius": self.radius, "pole_margin": self.pole_margin}


def flat_torus(n: int = 2) -> ManifoldModel:
    if n < 1:
        raise ParameterError("torus dimension must be positive")
    gens = tuple(Deck(np.eye(n), np.eye(n)[i]) for i in range(n))
    return ManifoldModel("flat_torus", n, generators=gens)


def flat_klein_bottle() -> ManifoldModel:
    flip = Deck(np.diag([1.0, -1.0]), np.array([1.0, 0.0]))
    shift = Deck(np.eye(2), np.array([0.0, 1.0]))
    return ManifoldModel("flat_klein_bottle", 2, generators=(flip, shift))


def sphere2(radius: float = 1.0, pole_margin: float = 0.05) -> ManifoldModel:
    if radius <= 0:
        raise ParameterError("radius must be positive")
    turn = Deck(np.eye(2), np.array([0.0, TWO_PI]))
    return ManifoldModel("sphere2", 2, radius=float(radius), pole_margin=float(pole_margin),
                         generators=(turn,))


def metric_at(model: ManifoldModel, x) -> np.ndarray:
    return model.metric(np.asarray(x, dtype=float))


def curvature_term(model: ManifoldModel, x, xi, v) -> np.ndarray:
    return model.curvature_term(np.asarray(x, dtype=float), xi, v)


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

PotentialFn = Callable[[float, np.ndarray], object]


@dataclass(frozen=True, eq=False)
class Potential:
    """A 1-periodic-in-time potential with its chart gradient and Hessian.

    The Hessian returned by :meth:`data` is the matrix of ordinary second
    partial derivatives; the covariant correction is applied by the caller.
    """

    kind: str
    value: PotentialFn
    gradient: PotentialFn
    hessian: PotentialFn
    sup_norm: float | None = None
    params: dict = field(default_factory=dict)

    def data(self, t: float, x) -> tuple[float, np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        return (float(self.value(t, x)), np.asarray(self.gradient(t, x), dtype=float),
                np.asarray(self.hessian(t, x), dtype=float))

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.params}


def potential_data(pot: Potential, t: float, x) -> tuple[float, np.ndarray, np.ndarray]:
    return pot.data(t, x)


def zero_potential() -> Potential:
    return Potential(
        "zero",
        lambda t, x: 0.0,
        lambda t, x: np.zeros(len(x)),
        lambda t, x: np.zeros((len(x), len(x))),
        sup_norm=0.0,
    )


def cosine_lattice(amplitudes, wavenumbers=None, frequencies=None) -> Potential:
    """``V(t, x) = sum_i eps_i cos(2 pi (k_i x^i - m_i t))``.

    ``wavenumbers`` (k_i) and ``frequencies`` (m_i) default to 1 and 0, giving
    the time-independent lattice ``eps (cos 2 pi x^1 + cos 2 pi x^2)``.  A
    nonzero ``m_i`` makes the potential a travelling wave, which breaks the
    time-shift symmetry of non-constant orbits.
    """
    eps = np.asarray(amplitudes, dtype=float)
    n = eps.size
    k = np.ones(n) if wavenumbers is None else np.asarray(wavenumbers, dtype=float)
    m = np.zeros(n) if frequencies is None else np.asarray(frequencies, dtype=float)
    if k.shape != eps.shape or m.shape != eps.shape:
        raise ParameterError("amplitudes, wavenumbers and frequencies must have equal length")
    if not (np.allclose(k, np.round(k)) and np.allclose(m, np.round(m))):
        raise ParameterError("wavenumbers and frequencies must be integers")

    def phase(t, x):
        return TWO_PI * (k * x - m * t)

    def value(t, x):
        return float(np.sum(eps * np.cos(phase(t, x))))

    def gradient(t, x):
        return -TWO_PI * k * eps * np.sin(phase(t, x))

    def hessian(t, x):
        return np.diag(-(TWO_PI * k) ** 2 * eps * np.cos(phase(t, x)))

    params = {"amplitudes": eps.tolist(), "wavenumbers": k.tolist(), "frequencies": m.tolist()}
    return Potential("cosine_lattice", value, gradient, hessian,
                     sup_norm=float(np.abs(eps).sum()), params=params)


def sphere_wave(wave_amplitude: float, zonal_amplitude: float, frequency: int = 1) -> Potential:
    """``V = a cos(phi - 2 pi m t) + b cos^2(theta)`` on the round sphere.

    The equator traversed at angular speed ``2 pi m`` with phase 0 or pi is a
    perturbed closed geodesic.
    """
    a, b, m = float(wave_amplitude), float(zonal_amplitude), int(frequency)

    def value(t, x):
        return a * np.cos(x[1] - TWO_PI * m * t) + b * np.cos(x[0]) ** 2

    def gradient(t, x):
        return np.array([-b * np.sin(2.0 * x[0]), -a * np.sin(x[1] - TWO_PI * m * t)])

    def hessian(t, x):
        return np.diag([-2.0 * b * np.cos(2.0 * x[0]), -a * np.cos(x[1] - TWO_PI * m * t)])

    params = {"wave_amplitude": a, "zonal_amplitude": b, "frequency": m}
    return Potential("sphere_wave", value, gradient, hessian,
                     sup_norm=abs(a) + abs(b), params=params)


def fd_consistency_error(pot: Potential, points, times, h: float = 1e-4) -> float:
    """Largest relative mismatch between supplied derivatives and centered differences."""
    worst = 0.0
    for t, x in zip(times, points):
        x = np.asarray(x, dtype=float)
        n = x.size
        _, grad, hess = pot.data(t, x)
        fd_grad = np.empty(n)
        fd_hess = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            fd_grad[i] = (pot.value(t, x + e) - pot.value(t, x - e)) / (2 * h)
            fd_hess[:, i] = (np.asarray(pot.gradient(t, x + e)) - np.asarray(pot.gradient(t, x - e))) / (2 * h)
        scale_g = 1.0 + np.max(np.abs(grad))
        scale_h = 1.0 + np.max(np.abs(hess))
        worst = max(worst, np.max(np.abs(fd_grad - grad)) / scale_g,
                    np.max(np.abs(fd_hess - hess)) / scale_h,
                    np.max(np.abs(hess - hess.T)) / scale_h)
    return float(worst)


def custom_potential(value, gradient, hessian, n: int, *, sample_lo=None, sample_hi=None,
                     samples: int = 16, rtol: float = 1e-5, seed: int = 0,
                     sup_norm: float | None = None) -> Potential:
    """Wrap user-supplied ``V``, ``grad V``, ``Hess V``.

    Consistency with centered finite differences is enforced at construction on
    random points of the box ``[sample_lo, sample_hi]`` (default the unit cube).
    """
    lo = np.zeros(n) if sample_lo is None else np.asarray(sample_lo, dtype=float)
    hi = np.ones(n) if sample_hi is None else np.asarray(sample_hi, dtype=float)
    rng = np.random.default_rng(seed)
    points = lo + (hi - lo) * rng.random((samples, n))
    times = rng.random(samples)
    pot = Potential("custom", value, gradient, hessian, sup_norm=sup_norm)
    err = fd_consistency_error(pot, points, times)
    if err > rtol:
        raise ParameterError(f"custom potential derivatives inconsistent (relative error {err:.3g})")
    if sup_norm is None:
        vals = [abs(value(t, x)) for t, x in zip(times, points)]
        pot = Potential("custom", value, gradient, hessian, sup_norm=float(max(vals)))
    return pot


def check_deck_invariance(model: ManifoldModel, pot: Potential, samples: int = 32,
                          seed: int = 0, tol: float = 1e-10) -> float:
    """Max violation of ``V(t, D x) = V(t, x)`` and ``V(t + 1, x) = V(t, x)``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x = rng.random(model.n)
        if model.kind == "sphere2":
            x = np.array([0.3 + (np.pi - 0.6) * x[0], TWO_PI * x[1]])
        t = rng.random()
        v0 = pot.value(t, x)
        worst = max(worst, abs(pot.value(t + 1.0, x) - v0))
        for gen in model.generators:
            for d in (gen, gen.inverse()):
                worst = max(worst, abs(pot.value(t, d.apply(x)) - v0))
    if worst > tol:
        raise ParameterError(
            f"potential is not invariant under the deck group / time shift (violation {worst:.3g})")
    return worst
