"""
driver.py — Registre des méthodes et intégration à pas fixe.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, NamedTuple, Optional

import numpy as np

from core.errors import InvalidArgumentError, StepFailureError
from core.models import SolverControls, is_integer_multiple
from core.solver_stats import SolverStats, log_solver_usage
from core.system import SchemeState, SemidiscreteSystem, energy, modified_energy
from integrators import splitting, steppers
from integrators.propagators import PropagatorCache, build_cache

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MethodSpec:
    """Description d'une méthode : famille de variable auxiliaire et mode de composition."""
    name: str
    family: str  # "sav" | "lm" | "plain"
    split: bool
    exponential: bool
    step: Callable = field(repr=False)

    @property
    def tracked_column(self) -> str:
        """Énergie dont la décroissance est garantie : H̃ pour la famille SAV, H sinon."""
        return "H_tilde" if self.family == "sav" else "H"

    @property
    def iterative(self) -> bool:
        """Les familles LM et AVF résolvent une équation non linéaire à chaque pas."""
        return self.family != "sav"


METHODS: Dict[str, MethodSpec] = {
    "avf": MethodSpec("avf", "plain", False, False, steppers.step_avf),
    "sav_cn": MethodSpec("sav_cn", "sav", False, False, steppers.step_sav_cn),
    "lm_cn": MethodSpec("lm_cn", "lm", False, False, steppers.step_lm_cn),
    "eisav": MethodSpec("eisav", "sav", False, True, steppers.step_eisav),
    "eilm": MethodSpec("eilm", "lm", False, True, steppers.step_eilm),
    "ssav": MethodSpec("ssav", "sav", True, False, splitting.step_ssav),
    "slm": MethodSpec("slm", "lm", True, False, splitting.step_slm),
    "savf": MethodSpec("savf", "plain", True, False, splitting.step_savf),
    "seavf": MethodSpec("seavf", "plain", True, True, splitting.step_seavf),
    "seisav": MethodSpec("seisav", "sav", True, True, splitting.step_seisav),
    "seilm": MethodSpec("seilm", "lm", True, True, splitting.step_seilm),
}


def get_method(method: str) -> MethodSpec:
    spec = METHODS.get(method)
    if spec is None:
        raise InvalidArgumentError(f"Méthode inconnue '{method}', attendue parmi {list(METHODS)}")
    return spec


def method_applicable(method: str, sys: SemidiscreteSystem) -> bool:
    """Les méthodes non scindées exigent une forme combinée dès que D ≠ 0."""
    spec = get_method(method)
    return spec.split or not sys.has_damping or sys.combined_S is not None


def cache_for(method: str, sys: SemidiscreteSystem, h: float) -> PropagatorCache:
    spec = get_method(method)
    target = sys if spec.split else steppers.unsplit_target(sys, method)
    return build_cache(target, h)


def initial_state(method: str, sys: SemidiscreteSystem, z0) -> SchemeState:
    return SchemeState.initial(sys, z0, get_method(method).family)


def aux_energy(sys: SemidiscreteSystem, state: SchemeState) -> float:
    """SAV → H̃ ; LM → V stocké ; sinon NaN."""
    if state.variant == "sav":
        return modified_energy(sys, state)
    if state.variant == "lm":
        return float(state.aux)
    return float("nan")


# ── Trajectoire ──────────────────────────────────────────────────────────────

class TrajectoryRecord(NamedTuple):
    step: int
    t: float
    z: np.ndarray
    H: float
    aux_energy: float


@dataclass
class Trajectory:
    """Enregistrements (t, z, H, énergie auxiliaire) d'une intégration."""
    method: str
    h: float
    steps: np.ndarray
    times: np.ndarray
    states: np.ndarray
    H: np.ndarray
    aux: np.ndarray
    wall_time_seconds: float = 0.0
    stats: SolverStats = field(default_factory=SolverStats)
    record_every: int = 1

    def __len__(self) -> int:
        return self.times.shape[0]

    def records(self) -> Iterator[TrajectoryRecord]:
        for i in range(len(self)):
            yield TrajectoryRecord(int(self.steps[i]), float(self.times[i]), self.states[i], float(self.H[i]), float(self.aux[i]))

    @property
    def terminal_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def tracked_energy(self) -> np.ndarray:
        """Colonne d'énergie garantie décroissante pour cette méthode."""
        return self.aux if get_method(self.method).family == "sav" else self.H


def step_count(h: float, T: float) -> int:
    """N tel que T = N·h ; refuse un pas final partiel."""
    if not (h > 0 and np.isfinite(h)):
        raise InvalidArgumentError(f"Le pas h doit être > 0 et fini, reçu {h}")
    if T == 0:
        return 0
    if not (T > 0 and np.isfinite(T)) or not is_integer_multiple(T, h):
        raise InvalidArgumentError(f"T={T} n'est pas un multiple entier de h={h}")
    return int(round(T / h))


def integrate(
    sys: SemidiscreteSystem,
    method: str,
    z0,
    h: float,
    T: float,
    controls: Optional[SolverControls] = None,
    record_every: int = 1,
) -> Trajectory:
    """
    Applique N = T/h pas de `method` depuis z0 (t_n = n·h).

    Un enregistrement tous les `record_every` pas ; l'état final est toujours
    enregistré. Le temps mesuré inclut la construction du cache.
    """
    spec = get_method(method)
    if not method_applicable(method, sys):
        raise InvalidArgumentError(
            f"Méthode '{method}' non applicable au système '{sys.label}' : pas de forme combinée"
        )
    if record_every < 1:
        raise InvalidArgumentError(f"record_every doit être ≥ 1, reçu {record_every}")
    controls = controls or SolverControls()
    n_steps = step_count(h, T)
    if z0 is None:
        z0 = sys.z0
    stats = SolverStats()

    start = time.perf_counter()
    cache = cache_for(method, sys, h)
    state = initial_state(method, sys, z0)

    indices = [0]
    states = [state.z]
    H_values = [energy(sys, state.z)]
    aux_values = [aux_energy(sys, state)]
    for n in range(n_steps):
        try:
            state = spec.step(sys, state, h, cache, controls, stats)
        except StepFailureError as e:
            raise e.with_step(n + 1) from e
        state = state.replace(t=(n + 1) * h)
        if (n + 1) % record_every == 0 or n + 1 == n_steps:
            indices.append(n + 1)
            states.append(state.z)
            H_values.append(energy(sys, state.z))
            aux_values.append(aux_energy(sys, state))
    wall = time.perf_counter() - start

    steps = np.asarray(indices, dtype=int)
    log_solver_usage(method, h, stats, wall)
    logger.info("Intégration %s : h=%g, %d pas, %.3f s", method, h, n_steps, wall)
    return Trajectory(
        method=method,
        h=h,
        steps=steps,
        times=steps * h,
        states=np.vstack(states),
        H=np.asarray(H_values),
        aux=np.asarray(aux_values),
        wall_time_seconds=wall,
        stats=stats,
        record_every=record_every,
    )
