"""
nonlinear.py — Solveurs itératifs des schémas implicites.

- fixed_point_solve : itération de point fixe (cœurs de type AVF)
- solve_multiplier  : équation scalaire du multiplicateur de Lagrange η,
  avec l'échelle de repli Newton → Newton amorti → balayage + brentq
"""

import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.optimize

from core.errors import StepFailureError
from core.models import SolverControls
from core.solver_stats import SolverStats

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps
DIVERGENCE_STREAK = 5
SCAN_INTERVAL = (-10.0, 10.0)
SCAN_POINTS = 64
MAX_HALVINGS = 30
STALL_FACTOR = 64.0
# Résidu admis pour η = 1 (contrainte mal conditionnée), relatif à l'échelle de F.
UNIT_ACCEPT_TOL = 1e-11
# Résidu admis quand F n'a pas de racine réelle : minimum de |F| au niveau de la tolérance de dissipation.
NO_ROOT_TOL = 1e-10


# ── Point fixe ───────────────────────────────────────────────────────────────

def fixed_point_solve(
    update: Callable[[np.ndarray], np.ndarray],
    initial: np.ndarray,
    controls: SolverControls,
    stats: Optional[SolverStats] = None,
) -> np.ndarray:
    """
    Itère z ← update(z) depuis `initial`.

    Arrêt quand ‖Δz‖∞ ≤ fixed_point_tol ou atteint le plancher d'arrondi
    4·eps·(1 + ‖z‖∞). Divergence déclarée après 5 croissances consécutives
    de ‖Δz‖∞.
    """
    z = initial
    previous = np.inf
    growth = 0
    for iteration in range(1, controls.fixed_point_max_iter + 1):
        z_new = update(z)
        if not np.all(np.isfinite(z_new)):
            raise StepFailureError(
                "Itération de point fixe non finie",
                diagnostics={"iteration": iteration},
            )
        delta = float(np.max(np.abs(z_new - z)))
        z = z_new
        floor = 4.0 * EPS * (1.0 + float(np.max(np.abs(z))))
        if delta <= controls.fixed_point_tol or delta <= floor:
            if stats is not None:
                stats.record_fixed_point(iteration)
            return z
        growth = growth + 1 if delta > previous else 0
        if growth >= DIVERGENCE_STREAK:
            raise StepFailureError(
                f"Divergence du point fixe ({DIVERGENCE_STREAK} croissances consécutives)",
                diagnostics={"iteration": iteration, "update_norm": delta},
            )
        previous = delta
    raise StepFailureError(
        f"Point fixe non convergé en {controls.fixed_point_max_iter} itérations",
        diagnostics={"update_norm": previous},
    )


# ── Multiplicateur de Lagrange ───────────────────────────────────────────────

class MultiplierProblem:
    """
    F(η) = V(p + ηq) − V_n − η·fᵀ(p + ηq − z_n), avec f = ∇V(ẑ).

    z^{n+1} = p + ηq est affine en η ; la racine impose la règle de
    dérivation discrète V(z^{n+1}) − V_n = η·fᵀ(z^{n+1} − z_n).
    """

    def __init__(self, potential, grad_potential, p, q, z_n, V_n, f):
        self.potential = potential
        self.grad_potential = grad_potential
        self.p = p
        self.q = q
        self.z_n = z_n
        self.V_n = V_n
        self.f = f
        self.fq = float(f @ q)

    def point(self, eta: float) -> np.ndarray:
        return self.p + eta * self.q

    def residual(self, eta: float) -> float:
        z = self.point(eta)
        return float(self.potential(z) - self.V_n - eta * (self.f @ (z - self.z_n)))

    def derivative(self, eta: float) -> float:
        z = self.point(eta)
        return float(self.grad_potential(z) @ self.q - self.f @ (z - self.z_n) - eta * self.fq)

    def scale(self, eta: float) -> float:
        z = self.point(eta)
        return 1.0 + abs(self.V_n) + abs(self.potential(z)) + abs(eta * (self.f @ (z - self.z_n)))

    def converged(self, eta: float, value: float, tol: float) -> bool:
        return abs(value) <= tol or abs(value) <= 8.0 * EPS * self.scale(eta)


def _newton(problem: MultiplierProblem, eta: float, controls: SolverControls, damped: bool, trace: List):
    """Newton (éventuellement amorti par division du pas) ; retourne (η, itérations) ou (None, itérations)."""
    value = problem.residual(eta)
    for iteration in range(1, controls.newton_max_iter + 1):
        trace.append((eta, value))
        if problem.converged(eta, value, controls.newton_tol):
            return eta, iteration - 1
        slope = problem.derivative(eta)
        if slope == 0.0 or not np.isfinite(slope):
            return None, iteration
        step = -value / slope
        if damped:
            lam = 1.0
            for _ in range(MAX_HALVINGS):
                trial = problem.residual(eta + lam * step)
                if np.isfinite(trial) and abs(trial) < abs(value):
                    break
                lam *= 0.5
            else:
                return None, iteration
            step *= lam
        eta_new = eta + step
        if not np.isfinite(eta_new):
            return None, iteration
        value = problem.residual(eta_new)
        if abs(step) <= max(controls.newton_tol, 4.0 * EPS) * (1.0 + abs(eta_new)) and np.isfinite(value):
            trace.append((eta_new, value))
            # pas négligeable loin d'une racine : minimum local de |F|, pas une solution
            if abs(value) <= STALL_FACTOR * EPS * problem.scale(eta_new):
                return eta_new, iteration
            return None, iteration
        eta = eta_new
    trace.append((eta, value))
    return None, controls.newton_max_iter


def _bracketed_root(problem: MultiplierProblem, controls: SolverControls, trace: List) -> Optional[float]:
    """Balayage de signe sur [−10, 10] puis brentq ; racine la plus proche de 1."""
    grid = np.linspace(SCAN_INTERVAL[0], SCAN_INTERVAL[1], SCAN_POINTS)
    values = np.array([problem.residual(eta) for eta in grid])
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0.0:
            root = scipy.optimize.brentq(problem.residual, a, b, xtol=max(controls.newton_tol, 4.0 * EPS))
            roots.append(float(root))
    if values[-1] == 0.0:
        roots.append(float(grid[-1]))
    if not roots:
        return None
    best = min(roots, key=lambda r: abs(r - 1.0))
    trace.append((best, problem.residual(best)))
    return best


def _least_residual(problem: MultiplierProblem, trace: List) -> Tuple[float, float]:
    """Minimiseur de |F| : balayage sur [−10, 10] puis recherche bornée autour du meilleur point."""
    grid = np.linspace(SCAN_INTERVAL[0], SCAN_INTERVAL[1], SCAN_POINTS)
    values = np.abs([problem.residual(eta) for eta in grid])
    values[~np.isfinite(values)] = np.inf
    i = int(np.argmin(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, SCAN_POINTS - 1)]
    result = scipy.optimize.minimize_scalar(
        lambda eta: abs(problem.residual(eta)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12},
    )
    eta = float(result.x)
    trace.append((eta, problem.residual(eta)))
    return eta, abs(problem.residual(eta))


def solve_multiplier(
    potential,
    grad_potential,
    p: np.ndarray,
    q: np.ndarray,
    z_n: np.ndarray,
    V_n: float,
    f: np.ndarray,
    controls: SolverControls,
    stats: Optional[SolverStats] = None,
) -> float:
    """
    Résout F(η) = 0.

    - contrainte dégénérée (f = 0 ou q = 0) → η = 1, sans résolution ;
    - |F(1)| ≤ 1e−11·échelle → η = 1 : la contrainte est déjà satisfaite à la
      tolérance d'énergie et η = 1 garde l'ordre 2 quand F est presque plate ;
    - sinon Newton → Newton amorti → balayage + brentq ;
    - sans racine réelle, le minimiseur de |F| est accepté si
      |F| ≤ 1e−10·échelle, sinon StepFailureError.
    """
    if not np.any(f) or not np.any(q):
        return 1.0

    problem = MultiplierProblem(potential, grad_potential, p, q, z_n, V_n, f)
    unit_value = problem.residual(1.0)
    if np.isfinite(unit_value) and abs(unit_value) <= UNIT_ACCEPT_TOL * problem.scale(1.0):
        logger.debug("η = 1 retenu : |F(1)| = %.3e", abs(unit_value))
        if stats is not None:
            stats.record_newton(0)
        return 1.0

    trace: List = []
    eta, iterations = _newton(problem, controls.newton_initial_eta, controls, damped=False, trace=trace)
    total = iterations
    fallback = False
    if eta is None:
        fallback = True
        logger.warning("Newton sur η sans convergence : repli sur Newton amorti")
        eta, iterations = _newton(problem, controls.newton_initial_eta, controls, damped=True, trace=trace)
        total += iterations
    if eta is None:
        logger.warning("Newton amorti sans convergence : balayage de signe et brentq")
        eta = _bracketed_root(problem, controls, trace)
    if eta is None:
        # F sans racine réelle : minimum de |F| positif
        if np.isfinite(unit_value) and abs(unit_value) <= NO_ROOT_TOL * problem.scale(1.0):
            eta = 1.0
        else:
            candidate, residual = _least_residual(problem, trace)
            if residual <= NO_ROOT_TOL * problem.scale(candidate):
                eta = candidate
        if eta is not None:
            logger.warning("η sans racine réelle : η = %.6g retenu, |F| = %.3e", eta, abs(problem.residual(eta)))
    if eta is None:
        raise StepFailureError(
            "Équation du multiplicateur η sans solution après Newton, Newton amorti et bissection",
            diagnostics={
                "eta_iterates": [float(e) for e, _ in trace],
                "residuals": [float(r) for _, r in trace],
            },
        )
    if stats is not None:
        stats.record_newton(total, fallback=fallback)
    return float(eta)
