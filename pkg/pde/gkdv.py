"""
gkdv.py — KdV généralisée amortie sur intervalle périodique.

S = D1, M = −εR (semi-définie, noyau constant), V = −σ/(k+2)·Σz^{k+2}, D = μI.
L'amortissement n'est pas absorbable dans S : pas de forme combinée.
"""

import numpy as np

from core.errors import InvalidArgumentError
from core.models import GkdvParams
from core.system import DEFAULT_SAV_SHIFT, SemidiscreteSystem
from pde.grids import GridSpec, difference_ops


def initial_data(grid: GridSpec) -> np.ndarray:
    x = grid.nodes()
    return 0.4 * np.exp(-((x - 0.5 * grid.L) ** 2) / 2.0)


def build_gkdv(
    grid: GridSpec,
    params: GkdvParams = GkdvParams(),
    sav_shift: float = DEFAULT_SAV_SHIFT,
) -> SemidiscreteSystem:
    if grid.boundary != "periodic":
        raise InvalidArgumentError("gKdV exige une grille périodique")
    n = grid.size
    D1, R = difference_ops(grid)
    M = -params.epsilon * R
    k, sigma = params.k, params.sigma

    def potential(z):
        return -sigma / (k + 2) * float(np.sum(z ** (k + 2)))

    def grad_potential(z):
        return -sigma * z ** (k + 1)

    return SemidiscreteSystem(
        label="gkdv",
        S=D1,
        M=M,
        potential=potential,
        grad_potential=grad_potential,
        damping=params.mu * np.eye(n),
        sav_shift=sav_shift,
        combined_S=None,
        parameters={"L": grid.L, "N": grid.N, **params.model_dump()},
        z0=initial_data(grid),
    )
