"""
experiments.py — Solutions de référence et études de convergence, d'efficacité
et d'énergie.
"""

import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from core.errors import InvalidArgumentError, NumericFailureError
from core.models import SolverControls, is_integer_multiple
from core.reference_cache import ReferenceCache, get_reference_cache
from core.solver_stats import SolverStats
from core.system import SemidiscreteSystem, energy
from integrators.driver import Trajectory, get_method, integrate, step_count

logger = logging.getLogger(__name__)

REFERENCE_METHOD = "seavf"
MONOTONICITY_TOL = 1e-10


@dataclass(frozen=True)
class ConvergenceRow:
    method: str
    h: float
    error: float
    observed_order: Optional[float] = None


@dataclass(frozen=True)
class EfficiencyRow:
    method: str
    h: float
    error: float
    wall_time_s: float
    fp_iters: int
    newton_iters: int
    iterative_solves: int
    ladder_fallbacks: int


@dataclass(frozen=True)
class EnergyErrorRow:
    method: str
    t: float
    E_H: float


@dataclass
class EnergyStudyResult:
    """Traces d'énergie d'une méthode et bilan de monotonie de la colonne suivie."""
    trajectory: Trajectory
    tracked_column: str
    energy_errors: List[EnergyErrorRow]
    violations: int
    max_increment: float


@dataclass
class MonotonicityReport:
    violations: int
    max_increment: float
    violating_steps: List[int] = field(default_factory=list)


# ── Référence ────────────────────────────────────────────────────────────────

def reference_solution(
    sys: SemidiscreteSystem,
    z0,
    T: float,
    h_ref: float,
    model_id: Optional[str] = None,
    controls: Optional[SolverControls] = None,
    record_every: int = 1,
    cache: Optional[ReferenceCache] = None,
    check_tol: float = 1e-8,
    use_cache: bool = True,
) -> Trajectory:
    """
    Trajectoire SEAVF à pas h_ref, mise en cache disque.

    Au premier calcul, les états finaux à h_ref et 2·h_ref doivent s'accorder
    à check_tol près, sinon NumericFailureError.
    """
    if z0 is None:
        z0 = sys.z0
    step_count(h_ref, T)
    model_id = model_id or sys.label
    z0 = sys.check_state(z0)
    param_hash = sys.fingerprint()
    cache = cache if cache is not None else get_reference_cache()

    if use_cache:
        entry = cache.get(model_id, param_hash, h_ref, T, record_every)
        if entry is not None and np.array_equal(entry["z"][0], z0):
            steps = np.rint(entry["t"] / h_ref).astype(int)
            H = entry["H"]
            logger.info("Référence %s rechargée depuis le cache (%d enregistrements)", model_id, len(H))
            return Trajectory(
                method=REFERENCE_METHOD, h=h_ref, steps=steps, times=entry["t"], states=entry["z"],
                H=H, aux=np.full_like(H, np.nan), record_every=record_every,
            )

    logger.info("Calcul de la référence %s : h_ref=%g, T=%g", model_id, h_ref, T)
    reference = integrate(sys, REFERENCE_METHOD, z0, h_ref, T, controls, record_every=record_every)

    if T > 0:
        n_coarse = step_count(2.0 * h_ref, T)
        coarse = integrate(sys, REFERENCE_METHOD, z0, 2.0 * h_ref, T, controls, record_every=max(n_coarse, 1))
        gap = float(np.max(np.abs(coarse.terminal_state - reference.terminal_state)))
        if gap > check_tol:
            raise NumericFailureError(
                f"Auto-vérification de la référence échouée : écart h_ref/2h_ref = {gap:.3e} > {check_tol:.0e}"
            )
        logger.info("Auto-vérification de la référence : écart %.3e", gap)

    if use_cache:
        cache.put(model_id, param_hash, h_ref, T, record_every, reference.times, reference.states, reference.H)
    return reference


def reference_states_at(ref: Trajectory, h: float, T: float) -> np.ndarray:
    """États de référence aux instants t_n = n·h, par indexation (sans interpolation)."""
    spacing = ref.h * ref.record_every
    if not is_integer_multiple(h, spacing):
        raise InvalidArgumentError(
            f"Le pas h={h} n'est pas un multiple de l'espacement de la référence ({spacing})"
        )
    if abs(ref.times[-1] - T) > 1e-9 * max(1.0, T):
        raise InvalidArgumentError(f"La référence s'arrête à t={ref.times[-1]}, attendu T={T}")
    stride = int(round(h / spacing))
    n_steps = step_count(h, T)
    indices = np.arange(n_steps + 1) * stride
    if indices[-1] != len(ref) - 1:
        raise InvalidArgumentError(
            f"Référence incompatible : {len(ref)} enregistrements pour {n_steps} pas de h={h}"
        )
    return ref.states[indices]


def trajectory_error(traj: Trajectory, ref_states: np.ndarray) -> float:
    """E = max_n ‖z^n − z_ref(t_n)‖∞."""
    return float(np.max(np.abs(traj.states - ref_states)))


def monotonicity(values: np.ndarray, tol: float = MONOTONICITY_TOL) -> MonotonicityReport:
    """Compte les pas où values[n+1] − values[n] > tol·(1 + |values[n]|)."""
    increments = np.diff(values)
    limits = tol * (1.0 + np.abs(values[:-1]))
    bad = np.nonzero(increments > limits)[0]
    max_inc = float(np.max(increments)) if increments.size else 0.0
    return MonotonicityReport(violations=int(bad.size), max_increment=max_inc, violating_steps=(bad + 1).tolist())


# ── Études ───────────────────────────────────────────────────────────────────

def _check_ladder(h_ladder: Sequence[float], T: float, ref: Trajectory) -> List[float]:
    if not h_ladder:
        raise InvalidArgumentError("L'échelle de pas est vide")
    spacing = ref.h * ref.record_every
    for h in h_ladder:
        step_count(h, T)
        if not is_integer_multiple(h, spacing):
            raise InvalidArgumentError(f"Le pas h={h} n'est pas un multiple de l'espacement de la référence ({spacing})")
    return sorted(h_ladder, reverse=True)


def _fan_out(jobs: List[Callable], workers: int) -> list:
    if workers <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def convergence_study(
    sys: SemidiscreteSystem,
    methods: Sequence[str],
    h_ladder: Sequence[float],
    T: float,
    ref: Trajectory,
    controls: Optional[SolverControls] = None,
    z0=None,
    workers: int = 1,
) -> Dict[str, List[ConvergenceRow]]:
    """Erreur maximale par (méthode, h) et ordre observé entre pas successifs de l'échelle."""
    ladder = _check_ladder(h_ladder, T, ref)
    z0 = sys.z0 if z0 is None else z0
    ref_states = {h: reference_states_at(ref, h, T) for h in ladder}

    def job(method, h):
        return lambda: trajectory_error(integrate(sys, method, z0, h, T, controls), ref_states[h])

    pairs = [(m, h) for m in methods for h in ladder]
    errors = _fan_out([job(m, h) for m, h in pairs], workers)
    by_pair = dict(zip(pairs, errors))

    table: Dict[str, List[ConvergenceRow]] = {}
    for method in methods:
        rows = []
        for i, h in enumerate(ladder):
            order = None
            if i > 0:
                prev_h, prev_err, err = ladder[i - 1], by_pair[(method, ladder[i - 1])], by_pair[(method, h)]
                if prev_err > 0 and err > 0:
                    order = float(np.log(prev_err / err) / np.log(prev_h / h))
            rows.append(ConvergenceRow(method=method, h=h, error=by_pair[(method, h)], observed_order=order))
        table[method] = rows
        logger.info(
            "Convergence %s : ordres %s", method,
            ", ".join(f"{r.observed_order:.2f}" for r in rows if r.observed_order is not None),
        )
    return table


def efficiency_study(
    sys: SemidiscreteSystem,
    methods: Sequence[str],
    h_ladder: Sequence[float],
    T: float,
    ref: Trajectory,
    controls: Optional[SolverControls] = None,
    z0=None,
    repeats: int = 3,
    clock: Callable[[], float] = time.perf_counter,
) -> List[EfficiencyRow]:
    """Runs strictement séquentiels : un échauffement écarté puis la médiane de `repeats` mesures."""
    ladder = _check_ladder(h_ladder, T, ref)
    z0 = sys.z0 if z0 is None else z0
    rows = []
    for method in methods:
        for h in ladder:
            ref_states = reference_states_at(ref, h, T)
            integrate(sys, method, z0, h, T, controls)
            timings = []
            traj = None
            for _ in range(repeats):
                start = clock()
                traj = integrate(sys, method, z0, h, T, controls)
                timings.append(clock() - start)
            stats: SolverStats = traj.stats
            row = EfficiencyRow(
                method=method,
                h=h,
                error=trajectory_error(traj, ref_states),
                wall_time_s=float(statistics.median(timings)),
                fp_iters=stats.fixed_point_iters,
                newton_iters=stats.newton_iters,
                iterative_solves=stats.iterative_solves,
                ladder_fallbacks=stats.ladder_fallbacks,
            )
            rows.append(row)
            logger.info("Efficacité %s h=%g : erreur=%.3e, temps=%.4f s", method, h, row.error, row.wall_time_s)
    _log_ranking(rows)
    return rows


def _log_ranking(rows: List[EfficiencyRow]) -> None:
    times = {(r.method, r.h): r.wall_time_s for r in rows}
    for (method, h), t in times.items():
        if method == "seisav" and ("seilm", h) in times:
            logger.info(
                "Temps à h=%g : seisav %.4f s, seilm %.4f s (%s)", h, t, times[("seilm", h)],
                "seisav plus rapide" if t <= times[("seilm", h)] else "seilm plus rapide",
            )


def energy_study(
    sys: SemidiscreteSystem,
    methods: Sequence[str],
    h: float,
    T: float,
    ref: Trajectory,
    controls: Optional[SolverControls] = None,
    z0=None,
    workers: int = 1,
    tol: float = MONOTONICITY_TOL,
) -> Dict[str, EnergyStudyResult]:
    """Traces H (et H̃), erreur d'énergie E_H(t_n) et nombre de violations de monotonie."""
    _check_ladder([h], T, ref)
    z0 = sys.z0 if z0 is None else z0
    ref_H = np.array([energy(sys, z) for z in reference_states_at(ref, h, T)])

    trajectories = _fan_out([(lambda m=m: integrate(sys, m, z0, h, T, controls)) for m in methods], workers)
    results = {}
    for method, traj in zip(methods, trajectories):
        column = get_method(method).tracked_column
        report = monotonicity(traj.tracked_energy, tol)
        errors = [
            EnergyErrorRow(method=method, t=float(t), E_H=float(abs(H - H_ref)))
            for t, H, H_ref in zip(traj.times, traj.H, ref_H)
        ]
        if report.violations:
            logger.warning(
                "Énergie %s : %d violations de monotonie sur la colonne %s (max %.3e)",
                method, report.violations, column, report.max_increment,
            )
        results[method] = EnergyStudyResult(
            trajectory=traj,
            tracked_column=column,
            energy_errors=errors,
            violations=report.violations,
            max_increment=report.max_increment,
        )
    return results
