"""
system.py — Abstraction du problème ż = S∇H(z) − D(t)z avec H(z) = ½zᵀMz + V(z).

Évaluation de l'énergie, gradient discret AVF, prédicteurs au demi-pas,
métrique d'énergie P_H et vérificateur de la condition ECLD.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Callable, Dict, Optional

import numpy as np
import scipy.linalg

from core.errors import InvalidArgumentError, NumericFailureError, StepFailureError
from core.matfun import ConstantDamping, PsdVerdict, as_square_matrix, check_psd, sym_part

if TYPE_CHECKING:
    from integrators.propagators import PropagatorCache

logger = logging.getLogger(__name__)

DEFAULT_SAV_SHIFT = 10.0

# Gauss–Legendre sur [0, 1] : 3 nœuds (exact jusqu'au degré 5) pour l'AVF,
# 5 nœuds pour la métrique d'énergie.
_GL3_NODES, _GL3_WEIGHTS = np.polynomial.legendre.leggauss(3)
AVF_NODES = 0.5 * (_GL3_NODES + 1.0)
AVF_WEIGHTS = 0.5 * _GL3_WEIGHTS
_GL5_NODES, _GL5_WEIGHTS = np.polynomial.legendre.leggauss(5)
METRIC_NODES = 0.5 * (_GL5_NODES + 1.0)
METRIC_WEIGHTS = 0.5 * _GL5_WEIGHTS

SCHEME_VARIANTS = ("sav", "lm", "plain")


@dataclass(frozen=True, eq=False)
class SemidiscreteSystem:
    """Une instance de problème semi-discrétisé (immuable après construction)."""
    label: str
    S: np.ndarray
    M: np.ndarray
    potential: Callable[[np.ndarray], float]
    grad_potential: Callable[[np.ndarray], np.ndarray]
    damping: object = None  # ConstantDamping | TimeDependentDamping ; None = pas d'amortissement
    sav_shift: float = DEFAULT_SAV_SHIFT
    combined_S: Optional[np.ndarray] = None
    parameters: Dict[str, object] = field(default_factory=dict)
    z0: Optional[np.ndarray] = None

    def __post_init__(self):
        S = as_square_matrix(self.S, "S")
        M = as_square_matrix(self.M, "M")
        if S.shape != M.shape:
            raise InvalidArgumentError(f"S {S.shape} et M {M.shape} doivent avoir la même taille")
        norm_m = np.linalg.norm(M, 2)
        if np.max(np.abs(M - M.T)) > 1e-14 * max(norm_m, 1e-300):
            raise InvalidArgumentError("M doit être symétrique")
        min_eig = scipy.linalg.eigh(M, eigvals_only=True)[0]
        if min_eig < -1e-12 * norm_m:
            raise InvalidArgumentError(f"M doit être semi-définie positive (λ_min={min_eig:.3e})")
        if not self.sav_shift > 0:
            raise InvalidArgumentError(f"La constante SAV C doit être > 0, reçu {self.sav_shift}")
        damping = self.damping
        if damping is None:
            damping = ConstantDamping(np.zeros_like(M))
        elif isinstance(damping, np.ndarray):
            damping = ConstantDamping(damping)
        if damping.is_constant and damping.matrix.shape != M.shape:
            raise InvalidArgumentError(f"D {damping.matrix.shape} incompatible avec d={M.shape[0]}")
        combined = None
        if self.combined_S is not None:
            combined = as_square_matrix(self.combined_S, "combined_S")
            if combined.shape != M.shape:
                raise InvalidArgumentError("combined_S doit avoir la taille de M")
        z0 = None
        if self.z0 is not None:
            z0 = self.check_state(self.z0)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "damping", damping)
        object.__setattr__(self, "combined_S", combined)
        object.__setattr__(self, "z0", z0)

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    @cached_property
    def SM(self) -> np.ndarray:
        return self.S @ self.M

    @property
    def has_damping(self) -> bool:
        return not self.damping.is_zero

    def check_state(self, z) -> np.ndarray:
        """Convertit z en vecteur fini de longueur d."""
        arr = np.asarray(z, dtype=float)
        if arr.shape != (self.M.shape[0],):
            raise InvalidArgumentError(f"État de forme {arr.shape}, attendu ({self.M.shape[0]},)")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("État non fini (NaN/Inf)")
        return arr

    def grad_energy(self, z: np.ndarray) -> np.ndarray:
        """∇H(z) = Mz + ∇V(z)."""
        return self.M @ z + self.grad_potential(z)

    def rhs(self, z: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Second membre S∇H(z) − D(t)z."""
        return self.S @ self.grad_energy(z) - self.damping.at(t) @ z

    def absorbed(self) -> "SemidiscreteSystem":
        """
        Forme combinée ż = S_c∇H(z), sans amortissement séparé.

        Retourne le système lui-même s'il n'a pas d'amortissement ; la forme
        combinée est construite une seule fois par instance.
        """
        return self._absorbed_form

    @cached_property
    def _absorbed_form(self) -> "SemidiscreteSystem":
        if not self.has_damping:
            return self
        if self.combined_S is None:
            raise InvalidArgumentError(
                f"Le système '{self.label}' n'admet pas de forme combinée : "
                "l'amortissement ne peut pas être absorbé dans l'opérateur"
            )
        return SemidiscreteSystem(
            label=f"{self.label}:combined",
            S=self.combined_S,
            M=self.M,
            potential=self.potential,
            grad_potential=self.grad_potential,
            damping=None,
            sav_shift=self.sav_shift,
            combined_S=self.combined_S,
            parameters=self.parameters,
            z0=self.z0,
        )

    def fingerprint(self) -> str:
        """Empreinte SHA256 du problème (paramètres, matrices, état initial)."""
        digest = hashlib.sha256()
        digest.update(self.label.encode("utf-8"))
        digest.update(json.dumps(self.parameters, sort_keys=True, default=str).encode("utf-8"))
        digest.update(repr(self.sav_shift).encode("utf-8"))
        for arr in (self.S, self.M):
            digest.update(np.ascontiguousarray(arr).tobytes())
        if self.damping.is_constant:
            digest.update(np.ascontiguousarray(self.damping.matrix).tobytes())
        if self.z0 is not None:
            digest.update(np.ascontiguousarray(self.z0).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True, eq=False)
class SchemeState:
    """
    État d'un schéma : temps, z, et variable auxiliaire étiquetée.

    variant "sav" → aux = r ≈ √(V + C) ; "lm" → aux = V stocké ; "plain" → aux = None.
    """
    t: float
    z: np.ndarray
    variant: str = "plain"
    aux: Optional[float] = None

    def __post_init__(self):
        if self.variant not in SCHEME_VARIANTS:
            raise InvalidArgumentError(f"Variante d'état inconnue : {self.variant}")
        if not np.all(np.isfinite(self.z)):
            raise StepFailureError("L'état z est devenu non fini", diagnostics={"t": self.t})
        if self.variant != "plain" and self.aux is None:
            raise InvalidArgumentError(f"La variante '{self.variant}' exige une variable auxiliaire")

    @classmethod
    def initial(cls, sys: SemidiscreteSystem, z, variant: str = "plain", t: float = 0.0) -> "SchemeState":
        """Initialisation cohérente de la variable auxiliaire."""
        z = sys.check_state(z)
        if variant == "sav":
            shifted = sys.potential(z) + sys.sav_shift
            if shifted <= 0:
                raise InvalidArgumentError(
                    f"V(z0) + C = {shifted:.3e} ≤ 0 : augmenter la constante SAV C"
                )
            return cls(t=t, z=z, variant="sav", aux=float(np.sqrt(shifted)))
        if variant == "lm":
            return cls(t=t, z=z, variant="lm", aux=float(sys.potential(z)))
        return cls(t=t, z=z, variant=variant)

    def replace(self, **changes) -> "SchemeState":
        values = {"t": self.t, "z": self.z, "variant": self.variant, "aux": self.aux}
        values.update(changes)
        return SchemeState(**values)


@dataclass(frozen=True)
class EnergyReport:
    """Énergie originale H et énergie modifiée H̃ (si disponible)."""
    H: float
    H_tilde: Optional[float] = None


# ── Énergies ─────────────────────────────────────────────────────────────────

def energy(sys: SemidiscreteSystem, z) -> float:
    """H(z) = ½zᵀMz + V(z)."""
    z = sys.check_state(z)
    return float(0.5 * z @ (sys.M @ z) + sys.potential(z))


def modified_energy(sys: SemidiscreteSystem, state: SchemeState) -> float:
    """H̃(z, r) = ½zᵀMz + r² − C (variante SAV uniquement)."""
    if state.variant != "sav":
        raise InvalidArgumentError(f"L'énergie modifiée exige un état SAV, reçu '{state.variant}'")
    z = state.z
    return float(0.5 * z @ (sys.M @ z) + state.aux ** 2 - sys.sav_shift)


def energy_report(sys: SemidiscreteSystem, state: SchemeState) -> EnergyReport:
    h_tilde = modified_energy(sys, state) if state.variant == "sav" else None
    return EnergyReport(H=energy(sys, state.z), H_tilde=h_tilde)


# ── Gradient discret et prédicteurs ─────────────────────────────────────────

def averaged_potential_gradient(sys: SemidiscreteSystem, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """∫₀¹ ∇V((1−ξ)a + ξb) dξ par Gauss–Legendre à 3 nœuds."""
    total = np.zeros_like(a)
    for xi, w in zip(AVF_NODES, AVF_WEIGHTS):
        total += w * sys.grad_potential((1.0 - xi) * a + xi * b)
    return total


def avf_discrete_gradient(sys: SemidiscreteSystem, a, b) -> np.ndarray:
    """Gradient discret AVF : M(a+b)/2 + ∫₀¹ ∇V((1−ξ)a + ξb) dξ."""
    a = sys.check_state(a)
    b = sys.check_state(b)
    return 0.5 * (sys.M @ (a + b)) + averaged_potential_gradient(sys, a, b)


def factor_cn_matrix(sys: SemidiscreteSystem, h: float):
    """Factorisation LU de (I − (h/2)SM), partagée par les schémas de type Crank–Nicolson."""
    K = np.eye(sys.dim) - 0.5 * h * sys.SM
    lu, piv = scipy.linalg.lu_factor(K, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-14 * max(pivots.max(), 1.0):
        raise NumericFailureError(f"Matrice I − (h/2)SM singulière pour h={h}")
    return lu, piv


def predictor_midpoint_linear(sys: SemidiscreteSystem, z, h: float, lu=None) -> np.ndarray:
    """Prédicteur ẑ : (I − (h/2)SM)ẑ = z + (h/2)S∇V(z)."""
    if not h > 0:
        raise InvalidArgumentError(f"Le pas h doit être > 0, reçu {h}")
    z = sys.check_state(z)
    if lu is None:
        lu = factor_cn_matrix(sys, h)
    return scipy.linalg.lu_solve(lu, z + 0.5 * h * (sys.S @ sys.grad_potential(z)))


def predictor_exponential(sys: SemidiscreteSystem, z, h: float, cache: "PropagatorCache") -> np.ndarray:
    """Prédicteur exponentiel ẑ = e^{A/2}z + (h/2)φ₁(A/2)S∇V(z)."""
    if not np.isclose(cache.h, h, rtol=1e-14, atol=0.0):
        raise InvalidArgumentError(f"Cache construit pour h={cache.h}, utilisé avec h={h}")
    z = sys.check_state(z)
    return cache.E_half @ z + 0.5 * h * (cache.Phi1_half @ (sys.S @ sys.grad_potential(z)))


def sav_direction(sys: SemidiscreteSystem, z_hat: np.ndarray) -> np.ndarray:
    """g = ∇V(ẑ)/√(V(ẑ) + C) ; échoue si V(ẑ) + C ≤ 0."""
    shifted = sys.potential(z_hat) + sys.sav_shift
    if shifted <= 0:
        raise StepFailureError(
            f"V(ẑ) + C = {shifted:.3e} ≤ 0 au point prédit : augmenter la constante SAV C",
            diagnostics={"shifted_potential": float(shifted)},
        )
    return sys.grad_potential(z_hat) / np.sqrt(shifted)


# ── Métrique d'énergie et ECLD ───────────────────────────────────────────────

def _potential_hessian(sys: SemidiscreteSystem, y: np.ndarray) -> np.ndarray:
    """∇²V(y) par différences centrées sur grad_potential."""
    d = y.shape[0]
    steps = np.sqrt(np.finfo(float).eps) * (1.0 + np.abs(y))
    hess = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = steps[j]
        hess[:, j] = (sys.grad_potential(y + e) - sys.grad_potential(y - e)) / (2.0 * steps[j])
    return sym_part(hess)


def energy_metric(sys: SemidiscreteSystem, z) -> np.ndarray:
    """P_H(z) = ∫₀¹ ∇²H(sz) ds (Gauss–Legendre à 5 nœuds), vérifie P_H(z)z = ∇H(z)."""
    z = sys.check_state(z)
    metric = sys.M.copy()
    for s, w in zip(METRIC_NODES, METRIC_WEIGHTS):
        metric += w * _potential_hessian(sys, s * z)
    return metric


def check_ecld(sys: SemidiscreteSystem, z, t: float = 0.0, tol: float = 1e-10) -> PsdVerdict:
    """Condition ECLD : sym(P_H(z)D(t)) ⪰ 0."""
    metric = energy_metric(sys, z)
    return check_psd(sym_part(metric @ sys.damping.at(t)), tol)


def finite_difference_gradient(sys: SemidiscreteSystem, z) -> np.ndarray:
    """Gradient de V par différences centrées (oracle de cohérence)."""
    z = sys.check_state(z)
    steps = np.cbrt(np.finfo(float).eps) * (1.0 + np.abs(z))
    grad = np.empty_like(z)
    for j in range(z.shape[0]):
        e = np.zeros_like(z)
        e[j] = steps[j]
        grad[j] = (sys.potential(z + e) - sys.potential(z - e)) / (2.0 * steps[j])
    return grad


def gradient_consistency_error(sys: SemidiscreteSystem, z) -> float:
    """‖∇V(z) − FD(V)(z)‖∞ / (1 + ‖∇V(z)‖∞)."""
    analytic = sys.grad_potential(sys.check_state(z))
    numeric = finite_difference_gradient(sys, z)
    return float(np.max(np.abs(analytic - numeric)) / (1.0 + np.max(np.abs(analytic))))
