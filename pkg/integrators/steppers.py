"""
steppers.py — Applications à un pas des schémas non scindés et cœurs hamiltoniens.

Les cœurs (`*_core`) avancent ż = S∇H(z) d'un pas h avec les matrices du cache
fourni ; les fonctions `step_*` les appliquent au système complet, sous sa forme
combinée S_c quand l'amortissement est non nul.
"""

import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from core.errors import InvalidArgumentError, StepFailureError
from core.models import SolverControls
from core.solver_stats import SolverStats
from core.system import (
    SchemeState,
    SemidiscreteSystem,
    averaged_potential_gradient,
    predictor_exponential,
    predictor_midpoint_linear,
    sav_direction,
)
from integrators.nonlinear import fixed_point_solve, solve_multiplier
from integrators.propagators import PropagatorCache, build_cache

logger = logging.getLogger(__name__)

DENOMINATOR_TOL = 1e-14


# ── Dénominateurs ────────────────────────────────────────────────────────────

def _scalar_denominator(value: float, scheme: str) -> float:
    if abs(value) < DENOMINATOR_TOL:
        raise StepFailureError(
            f"{scheme} : dénominateur scalaire quasi nul ({value:.3e})",
            diagnostics={"denominator": float(value)},
        )
    return value


# ── Cœurs SAV ────────────────────────────────────────────────────────────────

def sav_cn_core(
    sys: SemidiscreteSystem, z: np.ndarray, r: float, h: float, cache: PropagatorCache,
) -> Tuple[np.ndarray, float]:
    """
    Pas SAV/CN : (z¹ − z)/h = SM(z¹ + z)/2 + Sg·r̄, r¹ − r = ½gᵀ(z¹ − z).

    Réduction à l'inconnue scalaire ⟨g, z¹⟩ puis deux résolutions avec la
    factorisation constante de I − (h/2)SM.
    """
    z_hat = predictor_midpoint_linear(sys, z, h, lu=cache.cn_lu)
    g = sav_direction(sys, z_hat)
    Sg = sys.S @ g
    u = scipy.linalg.lu_solve(cache.cn_lu, cache.cn_rhs @ z + h * Sg * (r - 0.25 * (g @ z)))
    w = scipy.linalg.lu_solve(cache.cn_lu, Sg)
    denom = _scalar_denominator(1.0 - 0.25 * h * (g @ w), "SAV/CN")
    gz1 = (g @ u) / denom
    z1 = u + 0.25 * h * w * gz1
    r1 = r + 0.5 * (g @ (z1 - z))
    return z1, float(r1)


def eisav_core(
    sys: SemidiscreteSystem, z: np.ndarray, r: float, h: float, cache: PropagatorCache,
) -> Tuple[np.ndarray, float]:
    """Pas EISAV : aucune résolution linéaire, seulement des produits matrice-vecteur."""
    z_hat = predictor_exponential(sys, z, h, cache)
    g = sav_direction(sys, z_hat)
    w = cache.Phi1 @ (sys.S @ g)
    b = cache.E @ z + h * w * r - 0.25 * h * w * (g @ z)
    denom = _scalar_denominator(1.0 - 0.25 * h * (g @ w), "EISAV")
    gz1 = (g @ b) / denom
    z1 = b + 0.25 * h * w * gz1
    r1 = r + 0.5 * (gz1 - g @ z)
    return z1, float(r1)


# ── Cœurs LM ─────────────────────────────────────────────────────────────────

def lm_cn_core(
    sys: SemidiscreteSystem,
    z: np.ndarray,
    V_prev: float,
    h: float,
    cache: PropagatorCache,
    controls: SolverControls,
    stats: Optional[SolverStats] = None,
) -> Tuple[np.ndarray, float]:
    """Pas LM/CN : z¹ = p + ηq avec p, q issus de la factorisation constante."""
    z_hat = predictor_midpoint_linear(sys, z, h, lu=cache.cn_lu)
    f = sys.grad_potential(z_hat)
    p = scipy.linalg.lu_solve(cache.cn_lu, cache.cn_rhs @ z)
    q = h * scipy.linalg.lu_solve(cache.cn_lu, sys.S @ f)
    eta = solve_multiplier(sys.potential, sys.grad_potential, p, q, z, V_prev, f, controls, stats)
    z1 = p + eta * q
    return z1, float(sys.potential(z1))


def eilm_core(
    sys: SemidiscreteSystem,
    z: np.ndarray,
    V_prev: float,
    h: float,
    cache: PropagatorCache,
    controls: SolverControls,
    stats: Optional[SolverStats] = None,
) -> Tuple[np.ndarray, float]:
    """Pas EILM : p = e^{A}z, q = hφ₁(A)S∇V(ẑ), puis η scalaire."""
    z_hat = predictor_exponential(sys, z, h, cache)
    f = sys.grad_potential(z_hat)
    p = cache.E @ z
    q = h * (cache.Phi1 @ (sys.S @ f))
    eta = solve_multiplier(sys.potential, sys.grad_potential, p, q, z, V_prev, f, controls, stats)
    z1 = p + eta * q
    return z1, float(sys.potential(z1))


# ── Cœurs AVF ────────────────────────────────────────────────────────────────

def avf_core(
    sys: SemidiscreteSystem,
    z: np.ndarray,
    h: float,
    cache: PropagatorCache,
    controls: SolverControls,
    stats: Optional[SolverStats] = None,
) -> np.ndarray:
    """
    Pas AVF : z¹ = z + hS·∇̄H(z, z¹).

    La partie quadratique est traitée par la factorisation de I − (h/2)SM,
    seule l'intégrale de ∇V est itérée.
    """
    base = cache.cn_rhs @ z

    def update(z1):
        return scipy.linalg.lu_solve(cache.cn_lu, base + h * (sys.S @ averaged_potential_gradient(sys, z, z1)))

    return fixed_point_solve(update, z, controls, stats)


def eavf_core(
    sys: SemidiscreteSystem,
    z: np.ndarray,
    h: float,
    cache: PropagatorCache,
    controls: SolverControls,
    stats: Optional[SolverStats] = None,
) -> np.ndarray:
    """Pas AVF exponentiel : z¹ = e^{A}z + hφ₁(A)S∫₀¹∇V((1−ξ)z + ξz¹)dξ."""
    base = cache.E @ z
    PhiS = cache.Phi1 @ sys.S

    def update(z1):
        return base + h * (PhiS @ averaged_potential_gradient(sys, z, z1))

    return fixed_point_solve(update, z, controls, stats)


# ── Pas non scindés ──────────────────────────────────────────────────────────

def unsplit_target(sys: SemidiscreteSystem, scheme: str) -> SemidiscreteSystem:
    """Système sur lequel tourne un schéma non scindé (forme combinée si D ≠ 0)."""
    try:
        return sys.absorbed()
    except InvalidArgumentError as e:
        raise InvalidArgumentError(f"Schéma '{scheme}' non applicable : {e}") from e


def _prepare(sys, state, h, cache, controls, scheme: str, variant: str):
    if state.variant != variant:
        raise InvalidArgumentError(f"Le schéma '{scheme}' exige un état '{variant}', reçu '{state.variant}'")
    target = unsplit_target(sys, scheme)
    if cache is None:
        cache = build_cache(target, h)
    elif not cache.matches(target, h):
        raise InvalidArgumentError(f"Cache construit pour h={cache.h} et '{cache.system.label}', incompatible")
    return target, cache, controls or SolverControls()


def step_sav_cn(sys, state: SchemeState, h: float, cache=None, controls=None, stats=None) -> SchemeState:
    target, cache, _ = _prepare(sys, state, h, cache, controls, "sav_cn", "sav")
    z1, r1 = sav_cn_core(target, state.z, state.aux, h, cache)
    return state.replace(t=state.t + h, z=z1, aux=r1)


def step_eisav(sys, state: SchemeState, h: float, cache=None, controls=None, stats=None) -> SchemeState:
    target, cache, _ = _prepare(sys, state, h, cache, controls, "eisav", "sav")
    z1, r1 = eisav_core(target, state.z, state.aux, h, cache)
    return state.replace(t=state.t + h, z=z1, aux=r1)


def step_lm_cn(sys, state: SchemeState, h: float, cache=None, controls=None, stats=None) -> SchemeState:
    target, cache, controls = _prepare(sys, state, h, cache, controls, "lm_cn", "lm")
    z1, V1 = lm_cn_core(target, state.z, state.aux, h, cache, controls, stats)
    return state.replace(t=state.t + h, z=z1, aux=V1)


def step_eilm(sys, state: SchemeState, h: float, cache=None, controls=None, stats=None) -> SchemeState:
    target, cache, controls = _prepare(sys, state, h, cache, controls, "eilm", "lm")
    z1, V1 = eilm_core(target, state.z, state.aux, h, cache, controls, stats)
    return state.replace(t=state.t + h, z=z1, aux=V1)


def step_avf(sys, state: SchemeState, h: float, cache=None, controls=None, stats=None) -> SchemeState:
    target, cache, controls = _prepare(sys, state, h, cache, controls, "avf", "plain")
    z1 = avf_core(target, state.z, h, cache, controls, stats)
    return state.replace(t=state.t + h, z=z1)
