"""
afpu.py — Chaîne α-FPU amortie, conditions de Dirichlet homogènes.

Deux formulations de même second membre :
  conservative : S = J,                    D = blockdiag(0, γI − βR)
  dissipative  : S = [[0, I], [−I, −γI]],  D = blockdiag(0, −βR)
"""

import numpy as np
import scipy.linalg

from core.errors import InvalidArgumentError
from core.models import AfpuParams
from core.system import DEFAULT_SAV_SHIFT, SemidiscreteSystem
from pde.grids import GridSpec, difference_ops

FORMULATIONS = ("conservative", "dissipative")

# Décalages d'indice de la condition initiale à deux fronts.
_IC_NUMERATOR_SHIFTS = (97, 32)
_IC_DENOMINATOR_SHIFTS = (96, 33)


def initial_data(grid: GridSpec, ic_alpha: float = 0.1) -> np.ndarray:
    """u_j = 5·ln[(1+e^{2α(j−97)})(1+e^{2α(j−32)}) / ((1+e^{2α(j−96)})(1+e^{2α(j−33)}))], v = 0."""
    j = np.arange(1, grid.size + 1, dtype=float)
    log_terms = sum(np.logaddexp(0.0, 2.0 * ic_alpha * (j - s)) for s in _IC_NUMERATOR_SHIFTS)
    log_terms = log_terms - sum(np.logaddexp(0.0, 2.0 * ic_alpha * (j - s)) for s in _IC_DENOMINATOR_SHIFTS)
    u = 5.0 * log_terms
    return np.concatenate([u, np.zeros_like(u)])


def build_afpu(
    grid: GridSpec,
    params: AfpuParams = AfpuParams(),
    formulation: str = "conservative",
    sav_shift: float = DEFAULT_SAV_SHIFT,
) -> SemidiscreteSystem:
    if grid.boundary != "dirichlet":
        raise InvalidArgumentError("α-FPU exige une grille de Dirichlet")
    if formulation not in FORMULATIONS:
        raise InvalidArgumentError(f"Formulation inconnue '{formulation}', attendue parmi {FORMULATIONS}")
    n = grid.size
    _, R = difference_ops(grid)
    eye, zero = np.eye(n), np.zeros((n, n))

    M = scipy.linalg.block_diag(params.m ** 2 * eye - R, eye)
    friction = params.gamma * eye - params.beta * R
    combined_S = np.block([[zero, eye], [-eye, -friction]])
    if formulation == "conservative":
        S = np.block([[zero, eye], [-eye, zero]])
        D = scipy.linalg.block_diag(zero, friction)
    else:
        S = np.block([[zero, eye], [-eye, -params.gamma * eye]])
        D = scipy.linalg.block_diag(zero, -params.beta * R)

    k = params.k
    coeff = params.epsilon / (grid.dx ** (k + 2) * (k + 1) * (k + 2))

    def bond_stretch(z):
        # u_0 = u_N = 0
        return np.diff(np.concatenate([[0.0], z[:n], [0.0]]))

    def potential(z):
        return coeff * float(np.sum(bond_stretch(z) ** (k + 2)))

    def grad_potential(z):
        w = bond_stretch(z) ** (k + 1)
        grad = np.zeros_like(z)
        grad[:n] = coeff * (k + 2) * (w[:-1] - w[1:])
        return grad

    return SemidiscreteSystem(
        label=f"afpu_{formulation}",
        S=S,
        M=M,
        potential=potential,
        grad_potential=grad_potential,
        damping=D,
        sav_shift=sav_shift,
        combined_S=combined_S,
        parameters={"L": grid.L, "N": grid.N, "formulation": formulation, **params.model_dump()},
        z0=initial_data(grid, params.ic_alpha),
    )
