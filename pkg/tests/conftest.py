"""
conftest.py — Fixtures partagées pour les tests.
"""

import sys
import os

import numpy as np
import pytest

# Ajouter la racine du projet au path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.models import SolverControls  # noqa: E402
from core.reference_cache import ReferenceCache  # noqa: E402
from core.system import SemidiscreteSystem  # noqa: E402
from pde.catalog import build_system  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


@pytest.fixture
def controls():
    return SolverControls()


@pytest.fixture
def kg_system():
    """Klein–Gordon avec les paramètres de référence (γ = 0.1)."""
    return build_system("klein_gordon")


@pytest.fixture
def kg_conservative():
    return build_system("klein_gordon", params={"gamma": 0.0})


@pytest.fixture
def afpu_system():
    return build_system("afpu", formulation="conservative")


@pytest.fixture
def afpu_dissipative():
    return build_system("afpu", formulation="dissipative")


@pytest.fixture
def afpu_undamped():
    return build_system("afpu", params={"gamma": 0.0, "beta": 0.0})


@pytest.fixture
def gkdv_system():
    return build_system("gkdv")


@pytest.fixture
def gkdv_undamped():
    return build_system("gkdv", params={"mu": 0.0})


@pytest.fixture
def reference_cache(tmp_path):
    return ReferenceCache(cache_dir=str(tmp_path / "reference_cache"))


def random_spd(rng, d, low=1.0, high=10.0):
    """Matrice SPD de spectre dans [low, high]."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return Q @ np.diag(rng.uniform(low, high, d)) @ Q.T


def random_skew(rng, d, scale=1.0):
    B = rng.standard_normal((d, d))
    K = B - B.T
    return scale * K / np.linalg.norm(K, 2)


def extended_sav_rhs(sys):
    """Système étendu (z, r) : ż = S(Mz + g(z)r), ṙ = ½g(z)ᵀż avec g = ∇V/√(V + C)."""

    def rhs(t, y):
        z, r = y[:-1], y[-1]
        g = sys.grad_potential(z) / np.sqrt(sys.potential(z) + sys.sav_shift)
        dz = sys.S @ (sys.M @ z + g * r)
        return np.append(dz, 0.5 * (g @ dz))

    return rhs


def extended_lm_rhs(sys, eta=1.0):
    """Système étendu (z, s) : ż = S(Mz + η∇V(z)), ṡ = η∇V(z)ᵀż ; s = V(z) le long du flot pour η = 1."""

    def rhs(t, y):
        z = y[:-1]
        grad = sys.grad_potential(z)
        dz = sys.S @ (sys.M @ z + eta * grad)
        return np.append(dz, eta * (grad @ dz))

    return rhs


@pytest.fixture
def toy_system_factory(rng):
    """Fabrique de petits systèmes quartiques aléatoires (M SPD, S antisymétrique)."""

    def make(d=4, quartic=0.25, damping=None, sav_shift=10.0):
        M = random_spd(rng, d)
        M = 0.5 * (M + M.T)
        S = random_skew(rng, d)

        def potential(z):
            return quartic * float(np.sum(z ** 4))

        def grad_potential(z):
            return 4.0 * quartic * z ** 3

        return SemidiscreteSystem(
            label="toy",
            S=S,
            M=M,
            potential=potential,
            grad_potential=grad_potential,
            damping=damping,
            sav_shift=sav_shift,
        )

    return make
