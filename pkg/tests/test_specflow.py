from dataclasses import replace

import numpy as np
import pytest

from geodex.errors import ParameterError
from geodex.framing import Coefficients
from geodex.jacobi import assemble_A0, spectral_count
from geodex.maslov import cz_index, kernel_basis
from geodex.specflow import (MatrixFamily, OperatorFamily, build_proof_families,
                             crossing_identity, family_endpoint_paths, scalar_family,
                             spectral_flow)

from families import random_family


@pytest.fixture(scope="module")
def saddle_families(torus_cases):
    return build_proof_families(torus_cases[3].frame)


def test_arctan_flow():
    res = spectral_flow(scalar_family(np.arctan, (-2.0, 2.0)))
    assert res.flow == 1
    assert [c.signature for c in res.crossings] == [1]
    assert res.crossings[0].lam == pytest.approx(0.0, abs=1e-8)
    assert spectral_flow(scalar_family(lambda s: -np.arctan(s), (-2.0, 2.0))).flow == -1


def test_matrix_family_counts_agree():
    # eigenvalues s - 1, 2 - s, s - 3/2 on [0, 3] plus a fixed positive one
    fam = MatrixFamily(lambda s: np.diag([s - 1.0, 2.0 - s, s - 1.5, 4.0]), (0.0, 3.0))
    res = spectral_flow(fam, lam_steps=30)
    assert res.flow == res.trace_flow == res.inertia_flow == res.crossing_flow == 1
    assert sorted(round(c.lam, 8) for c in res.crossings) == [1.0, 1.5, 2.0]


def test_coupled_matrix_family():
    # a rotating basis does not confuse the trace matching
    def mat(s):
        c, d = np.cos(3 * s), np.sin(3 * s)
        r = np.array([[c, -d, 0], [d, c, 0], [0, 0, 1.0]])
        return r @ np.diag([s - 0.4, s - 0.7, 0.3 - s]) @ r.T

    res = spectral_flow(MatrixFamily(mat, (0.0, 1.0)))
    assert res.flow == 1 and len(res.crossings) == 3


def test_non_injective_endpoint_is_rejected():
    with pytest.raises(ParameterError):
        spectral_flow(scalar_family(lambda s: s, (0.0, 1.0)))


def test_positive_family_has_no_flow(saddle_families):
    fam_b = saddle_families.family_b
    res = spectral_flow(fam_b)
    assert res.flow == 0 and res.crossings == []
    for lam in (0.0, 0.5, 1.0):
        assert spectral_count(fam_b.operator(lam)).lowest[0] > 0


def test_saddle_homotopy_flow_is_morse_index(saddle_families):
    res = spectral_flow(saddle_families.family_a)
    assert res.flow == 2
    assert saddle_families.mu_hat < -np.pi


def test_proof_family_endpoints(saddle_families):
    fa, fb = saddle_families.family_a, saddle_families.family_b
    assert np.array_equal(fa.matrix(1.0), fb.matrix(0.0))
    pa = family_endpoint_paths(fa, 1.0)
    pb = family_endpoint_paths(fb, 0.0)
    assert np.abs(pa.psi - pb.psi).max() <= 1e-10
    # at lambda = 1 of the second family the generator is constant
    mu = saddle_families.mu_hat
    coef = fb.coefficients(1.0)
    for t in (0.0, 0.3, 0.9):
        assert np.allclose(coef.S_U(t), np.diag([mu, mu, 1.0, 1.0]))


def test_flow_equals_cz_difference_for_saddle(saddle_families):
    for fam in (saddle_families.family_a, saddle_families.family_b):
        flow = spectral_flow(fam).flow
        mu0 = cz_index(family_endpoint_paths(fam, 0.0))
        mu1 = cz_index(family_endpoint_paths(fam, 1.0))
        assert flow == int(mu1 - mu0)


def test_crossing_identity(saddle_families, klein_cases):
    fams = [saddle_families.family_a, build_proof_families(klein_cases[1].frame).family_a]
    checked = 0
    for fam in fams:
        fine = replace(fam, N=512)
        for c in spectral_flow(fam).crossings:
            lhs, rhs = crossing_identity(fine, c.lam)
            assert abs(lhs - rhs) <= 1e-4 * abs(lhs), (fam.name, c.lam, lhs, rhs)
            checked += 1
    assert checked >= 2


@pytest.mark.parametrize("sigma", [0, 1])
def test_kernel_dimensions_at_degenerate_parameter(sigma):
    # Q passes through zero at lambda = 1/2, where the free operator is singular
    n = 2
    z = np.zeros((n, n))

    def coef_fn(lam):
        return Coefficients(n, sigma, lambda t: (lam - 0.5) * 3.0 * np.eye(n), lambda t: z,
                            lambda t: z)

    fam = OperatorFamily(coef_fn, n, sigma, (0.0, 1.0), 128)
    count = spectral_count(fam.operator(0.5), null_tol=1e-6)
    psi1 = family_endpoint_paths(fam, 0.5, steps=512).end
    kdim = kernel_basis(psi1, 1e-6).shape[1]
    assert count.null == kdim == (n if sigma == 0 else n - 1)
    if sigma == 0:
        shear = np.block([[np.eye(n), np.eye(n)], [z, np.eye(n)]])
        assert np.allclose(psi1, shear, atol=1e-12)
    # away from the degenerate parameter both sides are trivial
    assert spectral_count(fam.operator(0.3)).null == 0
    assert kernel_basis(family_endpoint_paths(fam, 0.3, steps=512).end, 1e-6).shape[1] == 0


def test_flow_is_additive():
    rng = np.random.default_rng(31)
    fam = random_family(rng, 2, 1, N=64)
    whole = spectral_flow(fam)
    lams = sorted(c.lam for c in whole.crossings)
    # split in the middle of the widest gap between crossings
    pts = [0.0, *lams, 1.0]
    k = int(np.argmax(np.diff(pts)))
    cut = 0.5 * (pts[k] + pts[k + 1])
    left = spectral_flow(replace(fam, interval=(0.0, cut)))
    right = spectral_flow(replace(fam, interval=(cut, 1.0)))
    assert left.flow + right.flow == whole.flow
    assert len(whole.crossings) >= 2


def test_random_family_matches_cz_difference():
    rng = np.random.default_rng(3)
    fam = random_family(rng, 1, 0, N=64)
    res = spectral_flow(fam)
    mu0 = cz_index(family_endpoint_paths(fam, 0.0))
    mu1 = cz_index(family_endpoint_paths(fam, 1.0))
    assert res.flow == int(mu1 - mu0)
    assert res.flow == res.trace_flow == res.inertia_flow


def test_operator_family_matrix_is_A0():
    rng = np.random.default_rng(8)
    fam = random_family(rng, 2, 0, N=64)
    assert np.array_equal(fam.matrix(0.25), assemble_A0(fam.coefficients(0.25), 64).matrix)
