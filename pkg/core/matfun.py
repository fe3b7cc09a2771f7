"""
matfun.py — Fonctions de matrices denses : exponentielle, φ₁, propagateur exact
de l'amortissement linéaire et tests d'ordre de Loewner.

L'exponentielle repose sur scipy.linalg.expm (approximant de Padé diagonal de
degré 13 avec scaling-and-squaring). φ₁ est obtenue par l'exponentielle d'une
matrice augmentée, sans jamais résoudre contre A (A est singulière pour gKdV).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg

from core.errors import InvalidArgumentError, NumericFailureError, UnsupportedDescriptorError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PsdVerdict:
    """Verdict d'un test A ⪰ 0 (après symétrisation)."""
    is_psd: bool
    min_eigenvalue: float
    tolerance_used: float


# ── Validation ───────────────────────────────────────────────────────────────

def as_square_matrix(A, name: str = "A") -> np.ndarray:
    """Convertit en matrice carrée réelle finie, ou lève InvalidArgumentError."""
    arr = np.asarray(A, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise InvalidArgumentError(f"{name} doit être une matrice carrée non vide, reçu la forme {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contient des valeurs non finies (NaN/Inf)")
    return arr


# ── Exponentielle et φ₁ ──────────────────────────────────────────────────────

def expm(A) -> np.ndarray:
    """Exponentielle matricielle e^{A}."""
    arr = as_square_matrix(A)
    return scipy.linalg.expm(arr)


def expm_phi1(A) -> Tuple[np.ndarray, np.ndarray]:
    """
    Retourne (e^{A}, φ₁(A)) à partir d'une seule exponentielle augmentée.

    exp([[A, I], [0, 0]]) = [[e^{A}, φ₁(A)], [0, I]], ce qui reste valable
    pour A singulière.
    """
    arr = as_square_matrix(A)
    d = arr.shape[0]
    augmented = np.zeros((2 * d, 2 * d))
    augmented[:d, :d] = arr
    augmented[:d, d:] = np.eye(d)
    big = scipy.linalg.expm(augmented)
    return big[:d, :d].copy(), big[:d, d:].copy()


def phi1(A) -> np.ndarray:
    """φ₁(A) = A⁻¹(e^{A} − I), prolongée par continuité aux matrices singulières."""
    return expm_phi1(A)[1]


def phi1_residual(A: np.ndarray, E: np.ndarray, Phi1: np.ndarray) -> float:
    """Résidu relatif ‖Aφ₁(A) − (e^{A} − I)‖ / (1 + ‖e^{A}‖)."""
    d = A.shape[0]
    residual = np.linalg.norm(A @ Phi1 - (E - np.eye(d)), 2)
    return float(residual / (1.0 + np.linalg.norm(E, 2)))


# ── Amortissement ────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ConstantDamping:
    """Amortissement constant D."""
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_square_matrix(self.matrix, "D"))

    @property
    def is_constant(self) -> bool:
        return True

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix)

    def at(self, t: float) -> np.ndarray:
        return self.matrix

    def integral(self, t0: float, t1: float) -> np.ndarray:
        return (t1 - t0) * self.matrix


@dataclass(frozen=True, eq=False)
class TimeDependentDamping:
    """
    Amortissement D(t) dépendant du temps.

    `integral(t0, t1)` doit retourner ∫_{t0}^{t1} D(τ) dτ en forme close ;
    l'appelant garantit que les valeurs D(τ) commutent entre elles.
    """
    evaluate: Callable[[float], np.ndarray]
    integral_fn: Optional[Callable[[float, float], np.ndarray]] = None

    @property
    def is_constant(self) -> bool:
        return False

    @property
    def is_zero(self) -> bool:
        return False

    def at(self, t: float) -> np.ndarray:
        return as_square_matrix(self.evaluate(t), "D(t)")

    def integral(self, t0: float, t1: float) -> np.ndarray:
        if self.integral_fn is None:
            raise UnsupportedDescriptorError(
                "Amortissement dépendant du temps sans intégrale en forme close : "
                "aucune quadrature implicite n'est effectuée"
            )
        return as_square_matrix(self.integral_fn(t0, t1), "∫D")


def damping_propagator(D, t0: float, t1: float) -> np.ndarray:
    """Opérateur d'évolution exact Ψ^{(t0,t1)} = exp(−∫_{t0}^{t1} D(τ) dτ)."""
    if not (np.isfinite(t0) and np.isfinite(t1)):
        raise InvalidArgumentError("Les bornes de temps doivent être finies")
    if t1 < t0:
        raise InvalidArgumentError(f"Intervalle invalide : t1={t1} < t0={t0}")
    if isinstance(D, np.ndarray):
        D = ConstantDamping(D)
    if not isinstance(D, (ConstantDamping, TimeDependentDamping)):
        raise UnsupportedDescriptorError(f"Descripteur d'amortissement non supporté : {type(D).__name__}")
    if D.is_zero:
        return np.eye(D.matrix.shape[0])
    return scipy.linalg.expm(-D.integral(t0, t1))


# ── Ordre de Loewner ─────────────────────────────────────────────────────────

def sym_part(A) -> np.ndarray:
    """Partie symétrique (A + Aᵀ)/2."""
    arr = np.asarray(A, dtype=float)
    return 0.5 * (arr + arr.T)


def check_psd(A, tol: float = 1e-10) -> PsdVerdict:
    """
    Teste sym(A) ⪰ 0 avec une tolérance relative tol·(1 + ‖A‖₂).
    """
    if tol < 0:
        raise InvalidArgumentError(f"La tolérance doit être positive, reçu {tol}")
    arr = as_square_matrix(A)
    sym = sym_part(arr)
    try:
        eigenvalues = scipy.linalg.eigh(sym, eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericFailureError(f"Échec du solveur propre symétrique : {e}") from e
    min_eig = float(eigenvalues[0])
    tolerance_used = float(tol * (1.0 + np.linalg.norm(arr, 2)))
    verdict = PsdVerdict(
        is_psd=min_eig >= -tolerance_used,
        min_eigenvalue=min_eig,
        tolerance_used=tolerance_used,
    )
    logger.debug("check_psd : λ_min=%.3e, tolérance=%.3e, psd=%s", min_eig, tolerance_used, verdict.is_psd)
    return verdict
