"""
propagators.py — Précalcul, pour un pas h donné, des exponentielles, des φ₁ et
des propagateurs d'amortissement utilisés par tous les schémas.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.errors import InvalidArgumentError, NumericFailureError
from core.matfun import damping_propagator, expm_phi1, phi1_residual
from core.system import SemidiscreteSystem, factor_cn_matrix

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PropagatorCache:
    """Matrices constantes d'un couple (système, h) ; jamais modifié pendant l'intégration."""
    system: SemidiscreteSystem
    h: float
    A: np.ndarray
    E: np.ndarray
    E_half: np.ndarray
    Phi1: np.ndarray
    Phi1_half: np.ndarray
    Psi_half_left: Optional[np.ndarray]
    Psi_half_right: Optional[np.ndarray]
    cn_lu: Tuple[np.ndarray, np.ndarray]
    cn_rhs: np.ndarray  # I + (h/2)SM

    def damping_halves(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Propagateurs exacts de l'amortissement sur [t, t+h/2] et [t+h/2, t+h]."""
        if self.Psi_half_left is not None:
            return self.Psi_half_left, self.Psi_half_right
        damping = self.system.damping
        mid = t + 0.5 * self.h
        return damping_propagator(damping, t, mid), damping_propagator(damping, mid, t + self.h)

    def matches(self, system: SemidiscreteSystem, h: float) -> bool:
        return self.system is system and np.isclose(self.h, h, rtol=1e-14, atol=0.0)


def build_cache(sys: SemidiscreteSystem, h: float) -> PropagatorCache:
    """Construit le cache de (sys, h) et vérifie les identités Aφ₁(A) = e^{A} − I."""
    if not (h > 0 and np.isfinite(h)):
        raise InvalidArgumentError(f"Le pas h doit être > 0 et fini, reçu {h}")

    A = h * sys.SM
    E, Phi1 = expm_phi1(A)
    E_half, Phi1_half = expm_phi1(0.5 * A)
    for label, mat, e, phi in (("A", A, E, Phi1), ("A/2", 0.5 * A, E_half, Phi1_half)):
        residual = phi1_residual(mat, e, phi)
        if residual > RESIDUAL_TOL:
            raise NumericFailureError(
                f"Résidu φ₁({label}) = {residual:.3e} > {RESIDUAL_TOL:.0e} pour h={h}"
            )

    if sys.damping.is_constant:
        Psi = damping_propagator(sys.damping, 0.0, 0.5 * h)
        Psi_left, Psi_right = Psi, Psi
    else:
        Psi_left, Psi_right = None, None

    cn_lu = factor_cn_matrix(sys, h)
    cn_rhs = np.eye(sys.dim) + 0.5 * A

    logger.debug("Cache de propagateurs construit : système=%s, h=%g, d=%d", sys.label, h, sys.dim)
    return PropagatorCache(
        system=sys,
        h=h,
        A=A,
        E=E,
        E_half=E_half,
        Phi1=Phi1,
        Phi1_half=Phi1_half,
        Psi_half_left=Psi_left,
        Psi_half_right=Psi_right,
        cn_lu=cn_lu,
        cn_rhs=cn_rhs,
    )
