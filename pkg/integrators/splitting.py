"""
splitting.py — Compositions de Strang : demi-pas d'amortissement exact,
pas hamiltonien complet, demi-pas d'amortissement exact.

La variable SAV r est gelée pendant les sous-flots d'amortissement ; pour les
schémas LM, le potentiel de départ du cœur est V(z⁻), celui de l'état d'où part
le sous-flot hamiltonien.
"""

import logging

from core.errors import InvalidArgumentError
from core.models import SolverControls
from core.system import SchemeState, SemidiscreteSystem
from integrators.propagators import PropagatorCache, build_cache
from integrators.steppers import avf_core, eavf_core, eilm_core, eisav_core, lm_cn_core, sav_cn_core

logger = logging.getLogger(__name__)


def _prepare(sys: SemidiscreteSystem, state: SchemeState, h: float, cache, controls, scheme: str, variant: str):
    if state.variant != variant:
        raise InvalidArgumentError(f"Le schéma '{scheme}' exige un état '{variant}', reçu '{state.variant}'")
    if cache is None:
        cache = build_cache(sys, h)
    elif not cache.matches(sys, h):
        raise InvalidArgumentError(f"Cache construit pour h={cache.h} et '{cache.system.label}', incompatible")
    return cache, controls or SolverControls()


def _strang_sav(core, sys, state, h, cache: PropagatorCache):
    psi_left, psi_right = cache.damping_halves(state.t)
    z_minus = psi_left @ state.z
    z_plus, r_plus = core(sys, z_minus, state.aux, h, cache)
    return state.replace(t=state.t + h, z=psi_right @ z_plus, aux=r_plus)


def _strang_lm(core, sys, state, h, cache: PropagatorCache, controls, stats):
    psi_left, psi_right = cache.damping_halves(state.t)
    z_minus = psi_left @ state.z
    V_minus = float(sys.potential(z_minus))
    z_plus, _ = core(sys, z_minus, V_minus, h, cache, controls, stats)
    z1 = psi_right @ z_plus
    return state.replace(t=state.t + h, z=z1, aux=float(sys.potential(z1)))


def _strang_plain(core, sys, state, h, cache: PropagatorCache, controls, stats):
    psi_left, psi_right = cache.damping_halves(state.t)
    z_plus = core(sys, psi_left @ state.z, h, cache, controls, stats)
    return state.replace(t=state.t + h, z=psi_right @ z_plus)


def step_seisav(sys, state: SchemeState, h: float, cache=None, controls=None, stats=None) -> SchemeState:
    """SEISAV : cœur EISAV, aucune résolution itérative."""
    cache, _ = _prepare(sys, state, h, cache, controls, "seisav", "sav")
    return _strang_sav(eisav_core, sys, state, h, cache)


def step_ssav(sys, state: SchemeState, h: float, cache=None, controls=None, stats=None) -> SchemeState:
    """SSAV : cœur SAV/CN sur le sous-flot hamiltonien."""
    cache, _ = _prepare(sys, state, h, cache, controls, "ssav", "sav")
    return _strang_sav(sav_cn_core, sys, state, h, cache)


def step_seilm(sys, state: SchemeState, h: float, cache=None, controls=None, stats=None) -> SchemeState:
    """SEILM : cœur EILM ; la valeur stockée vaut V(z^{n+1})."""
    cache, controls = _prepare(sys, state, h, cache, controls, "seilm", "lm")
    return _strang_lm(eilm_core, sys, state, h, cache, controls, stats)


def step_slm(sys, state: SchemeState, h: float, cache=None, controls=None, stats=None) -> SchemeState:
    cache, controls = _prepare(sys, state, h, cache, controls, "slm", "lm")
    return _strang_lm(lm_cn_core, sys, state, h, cache, controls, stats)


def step_savf(sys, state: SchemeState, h: float, cache=None, controls=None, stats=None) -> SchemeState:
    cache, controls = _prepare(sys, state, h, cache, controls, "savf", "plain")
    return _strang_plain(avf_core, sys, state, h, cache, controls, stats)


def step_seavf(sys, state: SchemeState, h: float, cache=None, controls=None, stats=None) -> SchemeState:
    """SEAVF : cœur AVF exponentiel ; sert de générateur des solutions de référence."""
    cache, controls = _prepare(sys, state, h, cache, controls, "seavf", "plain")
    return _strang_plain(eavf_core, sys, state, h, cache, controls, stats)
