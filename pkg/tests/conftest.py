"""Shared fixtures.  The heavy L=16 eigensystems are session-scoped because
several module tests and acceptance criteria read the same spectra."""

import numpy as np
import pytest

from scarsim import analysis, hamiltonian, hilbert, model, spectral

JX_SEED = 7
JX_RANGE = (0.3, 1.2)


def chain_with_cross(L, f_a, f_e, seed=JX_SEED, boundary="open"):
    g = model.build_chain(L, boundary, f_a, f_e)
    g = model.with_embedding(g, (L + 5) // 6, 6)
    return model.add_cross_couplings(g, JX_RANGE, seed=seed)


@pytest.fixture(scope="session")
def times400():
    return np.arange(0.0, 401.0, 1.0)


@pytest.fixture(scope="session")
def l12_system():
    g = chain_with_cross(12, -9, -6)
    sec = hilbert.enumerate_sector(12, 6)
    return g, hamiltonian.assemble(g, sec)


@pytest.fixture(scope="session")
def l12_eigsys(l12_system):
    _, H = l12_system
    return spectral.diagonalize(H, want_vectors=True)


@pytest.fixture(scope="session")
def l16_system():
    g = chain_with_cross(16, -9, -6)
    sec = hilbert.enumerate_sector(16, 8)
    return g, hamiltonian.assemble(g, sec)


@pytest.fixture(scope="session")
def l16_eigsys(l16_system):
    _, H = l16_system
    return spectral.diagonalize(H, want_vectors=True)


@pytest.fixture(scope="session")
def l16_towers(l16_system, l16_eigsys):
    g, _ = l16_system
    word, _ = analysis.pi_states(g.dimers)
    overlap = spectral.overlaps(l16_eigsys, word)
    return spectral.detect_towers(overlap, l16_eigsys.energies)
