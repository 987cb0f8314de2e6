"""Shared orbit fixtures and the acceptance summary hook."""
from __future__ import annotations

import numpy as np
import pytest

from geodex.framing import frame_for_orbit
from geodex.geometry import cosine_lattice, flat_klein_bottle, flat_torus, sphere2, sphere_wave
from geodex.orbits import find_orbit

ACCEPTANCE_LINES: dict[int, str] = {}

EPS = 0.1
KLEIN_AMPLITUDES = (0.1, 0.3)


class OrbitCase:
    """A converged orbit together with its closed frame."""

    def __init__(self, name, model, pot, seed, word, expect_ind, expect_sigma):
        self.name = name
        self.model = model
        self.pot = pot
        self.deck = model.deck_from_word(word)
        self.orbit = find_orbit(model, pot, np.asarray(seed, dtype=float), self.deck)
        self.frame = frame_for_orbit(model, pot, self.orbit)
        self.expect_ind = expect_ind
        self.expect_sigma = expect_sigma

    @property
    def coef(self):
        return self.frame.coefficients()


def _torus_cases():
    model, pot = flat_torus(2), cosine_lattice([EPS, EPS])
    # Morse index of the constant loop at c: one negative mode per coordinate with Hess V > 0
    out = []
    for c, ind in (((0.0, 0.0), 0), ((0.5, 0.0), 1), ((0.0, 0.5), 1), ((0.5, 0.5), 2)):
        seed = [c[0] + 0.01, c[1] - 0.02, 0.003, -0.002]
        out.append(OrbitCase(f"torus{c}", model, pot, seed, None, ind, 0))
    return out


def _klein_cases():
    model = flat_klein_bottle()
    pot = cosine_lattice(list(KLEIN_AMPLITUDES), frequencies=[1, 0])
    return [
        OrbitCase("klein-a-c0", model, pot, [0.02, 0.01, 1.01, 0.0], [[0, 1]], 0, 1),
        OrbitCase("klein-a-c1/2", model, pot, [0.48, 0.01, 0.99, 0.0], [[0, 1]], 1, 1),
        OrbitCase("klein-ba-c0", model, pot, [0.01, 0.49, 1.0, 0.01], [[0, 1], [1, 1]], 2, 1),
    ]


def _sphere_cases():
    model, pot = sphere2(), sphere_wave(0.5, 0.3)
    return [OrbitCase("sphere-c-pi", model, pot, [np.pi / 2, 3.1, 0.0, 6.3], [[0, 1]], 4, 0)]


@pytest.fixture(scope="session")
def torus_cases():
    return _torus_cases()


@pytest.fixture(scope="session")
def klein_cases():
    return _klein_cases()


@pytest.fixture(scope="session")
def sphere_cases():
    return _sphere_cases()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
