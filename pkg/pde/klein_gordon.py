"""
klein_gordon.py — Équation de Klein–Gordon non linéaire amortie, grille périodique.

z = (q, p) ∈ R^{2N}, H = ½qᵀ(ω²I − κR)q + ½pᵀp + (α/4)Σq⁴, D = blockdiag(0, γI).
"""

import numpy as np
import scipy.linalg

from core.errors import InvalidArgumentError
from core.models import KleinGordonParams
from core.system import DEFAULT_SAV_SHIFT, SemidiscreteSystem
from pde.grids import GridSpec, difference_ops


def initial_data(grid: GridSpec) -> np.ndarray:
    """u(x, 0) = tanh(√2x)/√5, u_t(x, 0) = −(3√2/(10√5))·sech²(√2x)."""
    x = grid.nodes()
    u = np.tanh(np.sqrt(2.0) * x) / np.sqrt(5.0)
    v = -(3.0 * np.sqrt(2.0)) / (10.0 * np.sqrt(5.0)) / np.cosh(np.sqrt(2.0) * x) ** 2
    return np.concatenate([u, v])


def build_klein_gordon(
    grid: GridSpec,
    params: KleinGordonParams = KleinGordonParams(),
    sav_shift: float = DEFAULT_SAV_SHIFT,
) -> SemidiscreteSystem:
    if grid.boundary != "periodic":
        raise InvalidArgumentError("Klein–Gordon exige une grille périodique")
    n = grid.size
    _, R = difference_ops(grid)
    eye, zero = np.eye(n), np.zeros((n, n))

    S = np.block([[zero, eye], [-eye, zero]])
    M = scipy.linalg.block_diag(params.omega ** 2 * eye - params.kappa * R, eye)
    D = scipy.linalg.block_diag(zero, params.gamma * eye)
    combined_S = np.block([[zero, eye], [-eye, -params.gamma * eye]])
    alpha = params.alpha

    def potential(z):
        return 0.25 * alpha * float(np.sum(z[:n] ** 4))

    def grad_potential(z):
        grad = np.zeros_like(z)
        grad[:n] = alpha * z[:n] ** 3
        return grad

    return SemidiscreteSystem(
        label="klein_gordon",
        S=S,
        M=M,
        potential=potential,
        grad_potential=grad_potential,
        damping=D,
        sav_shift=sav_shift,
        combined_S=combined_S,
        parameters={"L": grid.L, "N": grid.N, **params.model_dump()},
        z0=initial_data(grid),
    )
