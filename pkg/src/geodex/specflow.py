"""Spectral flow of one-parameter families of twisted Sturm-Liouville operators.

Three independent counts are produced for every family and must agree:

* the crossing count: at each parameter where an eigenvalue vanishes, the
  signature of ``d/dlambda A`` restricted to the kernel;
* the trace count: eigenvalue branches are followed from one parameter value
  to the next by eigenvector overlap, and their sign changes are summed;
* the inertia count: ``n_-(A_start) - n_-(A_end)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .errors import ParameterError, RegularityError, ResolutionError
from .framing import ClosedFrame, Coefficients, smoothstep
from .jacobi import assemble_A0, spectral_count
from .orbits import J0

LAMBDA_STEPS = 64
LAMBDA_TOL = 1e-8
GROUP_TOL = 1e-6
DIFF_STEP = 1e-5


@dataclass(frozen=True, eq=False)
class MatrixFamily:
    """A family ``lambda -> symmetric matrix`` on a closed interval."""

    matrix_fn: Callable[[float], np.ndarray]
    interval: tuple = (0.0, 1.0)

    def matrix(self, lam: float) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.matrix_fn(lam), dtype=float))

    def null_tol(self, lam: float) -> float:
        return 1e-6


@dataclass(frozen=True, eq=False)
class OperatorFamily:
    """``lambda -> (Q_lambda, P_lambda)`` with a fixed twist, discretised on ``N`` points."""

    coef_fn: Callable[[float], Coefficients]
    n: int
    sigma: int
    interval: tuple = (0.0, 1.0)
    N: int = 128
    name: str = "family"
    meta: dict = field(default_factory=dict)

    def coefficients(self, lam: float) -> Coefficients:
        return self.coef_fn(lam)

    def operator(self, lam: float):
        return assemble_A0(self.coef_fn(lam), self.N, tag=self.name)

    def matrix(self, lam: float) -> np.ndarray:
        return self.operator(lam).matrix

    def null_tol(self, lam: float) -> float:
        op = self.operator(lam)
        return 1e-6 * (1.0 + op.q_norm)


@dataclass(frozen=True, eq=False)
class FlowCrossing:
    lam: float
    dim: int
    signature: int
    form: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralFlowResult:
    flow: int
    crossings: list
    trace_flow: int
    inertia_flow: int
    lambdas: np.ndarray
    traces: np.ndarray

    @property
    def crossing_flow(self) -> int:
        return int(sum(c.signature for c in self.crossings))


def _branch_value(family, lam, index):
    return eigh(family.matrix(lam), eigvals_only=True)[index]


def _track(vals, vecs, window):
    """Follow the ``window`` eigenvalues nearest zero by eigenvector overlap.

    Returns an array ``(steps, window)`` of branch values (NaN once a branch
    has left the window) and the trace flow.
    """
    steps = len(vals)
    order0 = np.argsort(np.abs(vals[0]))[:window]
    current = list(order0)
    traces = np.full((steps, window), np.nan)
    traces[0] = vals[0][current]
    flow = 0
    for j in range(1, steps):
        cand = np.argsort(np.abs(vals[j]))[: window + 2]
        overlap = np.abs(vecs[j - 1][:, current].T @ vecs[j][:, cand])
        rows, cols = linear_sum_assignment(-overlap)
        new = list(current)
        for r, c in zip(rows, cols):
            prev_v, next_v = vals[j - 1][current[r]], vals[j][cand[c]]
            if overlap[r, c] < 0.5:
                # near-degenerate clusters rotate their eigenvectors; accept the
                # match when the cluster span is preserved
                cluster = np.abs(vals[j] - next_v) < 1e-3 * (1.0 + abs(next_v))
                proj = np.linalg.norm(vecs[j][:, cluster].T @ vecs[j - 1][:, current[r]])
                if proj < 0.5:
                    raise ResolutionError(
                        "eigenvalue traces cannot be matched; refine the parameter grid")
            if prev_v < 0 <= next_v:
                flow += 1
            elif prev_v >= 0 > next_v:
                flow -= 1
            new[r] = cand[c]
            traces[j, r] = next_v
        current = new
    return traces, flow


def _crossing_operator(family, lam, vectors, delta=DIFF_STEP):
    lo, hi = family.interval
    a, b = max(lo, lam - delta), min(hi, lam + delta)
    da = (family.matrix(b) - family.matrix(a)) / (b - a)
    form = vectors.T @ da @ vectors
    return 0.5 * (form + form.T)


def spectral_flow(family, lam_steps: int = LAMBDA_STEPS, window: int | None = None,
                  lam_tol: float = LAMBDA_TOL, form_tol: float = 1e-8) -> SpectralFlowResult:
    """Upward spectral flow of a family of symmetric matrices or operators.

    Raises :class:`ResolutionError` if the crossing, trace and inertia counts
    disagree and :class:`RegularityError` for a degenerate crossing operator.
    """
    lo, hi = family.interval
    lams = np.linspace(lo, hi, lam_steps + 1)
    vals, vecs = [], []
    for lam in lams:
        w, v = eigh(family.matrix(lam))
        vals.append(w)
        vecs.append(v)
    size = len(vals[0])
    for end in (0, -1):
        tol = family.null_tol(lams[end])
        if np.min(np.abs(vals[end])) <= tol:
            raise ParameterError(f"endpoint operator at lambda = {lams[end]:.6g} is not injective")
    nwin = window or (2 * getattr(family, "n", 1) + 6)
    traces, trace_flow = _track(vals, vecs, min(nwin, size))
    inertia_flow = int(np.sum(vals[0] < 0) - np.sum(vals[-1] < 0))

    # locate zeros of the ordered branches by bisection
    roots = []
    for j in range(lam_steps):
        nneg_a, nneg_b = int(np.sum(vals[j] < 0)), int(np.sum(vals[j + 1] < 0))
        for idx in range(min(nneg_a, nneg_b), max(nneg_a, nneg_b)):
            fa, fb = vals[j][idx], vals[j + 1][idx]
            if (fa < 0) == (fb < 0):
                continue
            root = brentq(lambda s: _branch_value(family, s, idx), lams[j], lams[j + 1],
                          xtol=lam_tol)
            roots.append(root)
    roots.sort()
    groups: list[list[float]] = []
    for r in roots:
        if groups and r - groups[-1][-1] < GROUP_TOL:
            groups[-1].append(r)
        else:
            groups.append([r])

    crossings = []
    for g in groups:
        lam = float(np.mean(g))
        w, v = eigh(family.matrix(lam))
        order = np.argsort(np.abs(w))
        k = len(g)
        vectors = v[:, order[:k]]
        form = _crossing_operator(family, lam, vectors)
        ev = np.linalg.eigvalsh(form)
        if np.any(np.abs(ev) <= form_tol):
            raise RegularityError(f"degenerate crossing operator at lambda = {lam:.8g}", where=lam)
        crossings.append(FlowCrossing(lam, k, int(np.sum(ev > 0) - np.sum(ev < 0)), form))
    result = SpectralFlowResult(inertia_flow, crossings, trace_flow, inertia_flow, lams, traces)
    if not (result.crossing_flow == trace_flow == inertia_flow):
        raise ResolutionError(
            f"spectral flow counts disagree: crossings {result.crossing_flow}, "
            f"traces {trace_flow}, inertia {inertia_flow}")
    return result


def scalar_family(fn: Callable[[float], float], interval) -> MatrixFamily:
    """A one-dimensional family, e.g. ``arctan`` on ``[-T, T]``."""
    return MatrixFamily(lambda s: np.array([[fn(s)]]), tuple(interval))


# -- families built from coefficient data ------------------------------------

def _scaled(coef: Coefficients, q_scale, q_shift, p_scale) -> Coefficients:
    eye = np.eye(coef.n)
    return Coefficients(coef.n, coef.sigma,
                        lambda t: q_scale * coef.q(t) + q_shift * eye,
                        lambda t: p_scale * coef.p(t),
                        lambda t: p_scale * coef.dp(t),
                        coef.grid)


@dataclass(frozen=True, eq=False)
class ProofFamilies:
    family_a: OperatorFamily
    family_b: OperatorFamily
    mu_hat: float
    beta: Callable[[float], float]
    dbeta: Callable[[float], float]
    margin: float
    attempts: int


def default_mu_hat(coef: Coefficients, N: int = 128) -> float:
    """``min(-pi, lowest eigenvalue of A0) - 1``."""
    low = spectral_count(assemble_A0(coef, N)).lowest[0]
    return float(min(-np.pi, low) - 1.0)


def build_proof_families(data, mu_hat: float | None = None, N: int = 128,
                         margin: float = 0.1, seed: int = 0, max_attempts: int = 5) -> ProofFamilies:
    """The two homotopies from ``A0`` to a positive operator with constant coefficients.

    ``family_a``: ``Q_l = (1 - l) Q + beta(l)``, ``P_l = P`` with ``beta`` a
    smooth decreasing ramp from 0 to ``mu_hat``.
    ``family_b``: ``Q_l = mu_hat``, ``P_l = (1 - l) P``; positive for every ``l``.

    At each crossing of ``family_a`` the slope condition
    ``beta'(l_i)`` not an eigenvalue of ``Q(1)`` is checked; on violation ``mu_hat`` is
    rescaled by ``1 + 1e-3 r`` (``r`` uniform, seeded) and the check repeated.
    """
    coef = data.coefficients() if isinstance(data, ClosedFrame) else data
    low = spectral_count(assemble_A0(coef, N)).lowest[0]
    if mu_hat is None:
        mu_hat = float(min(-np.pi, low) - 1.0)
    if not (mu_hat < -np.pi and mu_hat < low):
        raise ParameterError(f"mu_hat = {mu_hat} must lie below -pi and below the spectrum of A0")
    rng = np.random.default_rng(seed)
    q1 = np.linalg.eigvalsh(coef.q(1.0))
    for attempt in range(1, max_attempts + 1):
        fam_a, fam_b, beta, dbeta = _proof_pair(coef, mu_hat, N, margin)
        flow = spectral_flow(fam_a)
        slopes = [dbeta(c.lam) for c in flow.crossings]
        if all(np.min(np.abs(q1 - s)) > 1e-6 for s in slopes):
            return ProofFamilies(fam_a, fam_b, mu_hat, beta, dbeta, margin, attempt)
        mu_hat *= 1.0 + 1e-3 * rng.uniform()
    raise RegularityError("cut-off slope meets the spectrum of Q(1) after all re-ramping attempts")


def _proof_pair(coef, mu_hat, N, margin):
    def beta(lam):
        return mu_hat * smoothstep(lam, margin)

    def dbeta(lam):
        return mu_hat * smoothstep(lam, margin, 1)

    fam_a = OperatorFamily(lambda lam: _scaled(coef, 1.0 - lam, beta(lam), 1.0),
                           coef.n, coef.sigma, (0.0, 1.0), N, "A_lambda",
                           {"mu_hat": mu_hat})
    eye = np.eye(coef.n)
    base = Coefficients(coef.n, coef.sigma, lambda t: mu_hat * eye, coef.p, coef.dp, coef.grid)
    fam_b = OperatorFamily(lambda lam: _scaled(base, 1.0, 0.0, 1.0 - lam),
                           coef.n, coef.sigma, (0.0, 1.0), N, "A_tilde_lambda",
                           {"mu_hat": mu_hat})
    return fam_a, fam_b, beta, dbeta


def family_endpoint_paths(family: OperatorFamily, lam: float, power: int = 1,
                          steps: int | None = None):
    """Fundamental solution of the twisted generator ``S_{lambda,U}``."""
    return family.coefficients(lam).fundamental_solution(True, power, steps)


def refine_crossing(family, lam: float, width: float = 1e-3, tol: float = 1e-11) -> float:
    """Parameter near ``lam`` minimising the smallest ``|eigenvalue|`` of the family."""
    lo, hi = family.interval
    res = minimize_scalar(lambda s: np.min(np.abs(eigh(family.matrix(s), eigvals_only=True))),
                          bounds=(max(lo, lam - width), min(hi, lam + width)), method="bounded",
                          options={"xatol": tol})
    return float(res.x)


def crossing_identity(family: OperatorFamily, lam: float, delta: float = DIFF_STEP,
                      steps: int | None = None, refine: bool = True) -> tuple[float, float]:
    """Both sides of ``<xi, dA xi> = -<zeta(0), S_hat zeta(0)>`` at a crossing.

    ``xi`` is the L2-normalised discrete kernel vector, ``zeta(0) = (xi(0),
    xi'(0) + P(0) xi(0))`` with ``xi'(0)`` differenced across the twisted
    boundary, and ``S_hat = J0 (d/dlambda Psi_U(1)) Psi_U(1)^{-1}``.  With
    ``refine`` the crossing is first relocated on the family's own grid.
    """
    if refine:
        lam = refine_crossing(family, lam)
    n, N = family.n, family.N
    h = 1.0 / N
    w, v = eigh(family.matrix(lam))
    vec = v[:, int(np.argmin(np.abs(w)))]
    lhs = float(_crossing_operator(family, lam, vec[:, None], delta)[0, 0])
    xi = vec.reshape(N, n) / np.sqrt(h)
    coef = family.coefficients(lam)
    xi_prev = coef.twist @ xi[N - 1]
    eta0 = (xi[1] - xi_prev) / (2.0 * h) + coef.p(0.0) @ xi[0]
    zeta = np.concatenate([xi[0], eta0])
    lo, hi = family.interval
    a, b = max(lo, lam - delta), min(hi, lam + delta)
    pa = family_endpoint_paths(family, a, steps=steps).end
    pb = family_endpoint_paths(family, b, steps=steps).end
    pm = family_endpoint_paths(family, lam, steps=steps).end
    s_hat = J0(n) @ ((pb - pa) / (b - a)) @ np.linalg.inv(pm)
    s_hat = 0.5 * (s_hat + s_hat.T)
    return lhs, float(-zeta @ s_hat @ zeta)
