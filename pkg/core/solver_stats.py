"""
solver_stats.py — Compteurs d'invocation des solveurs itératifs et journal agrégé.
"""

import logging
import time
from dataclasses import asdict, dataclass
from threading import Lock
from typing import List

logger = logging.getLogger(__name__)

_lock = Lock()
_run_log: List[dict] = []

# Au-delà, une itération de Newton est signalée (propriété souple).
NEWTON_SOFT_LIMIT = 10


@dataclass
class SolverStats:
    """Compteurs d'un run d'intégration (propriété exclusive du run)."""
    fixed_point_iters: int = 0
    newton_iters: int = 0
    iterative_solves: int = 0
    ladder_fallbacks: int = 0
    max_newton_iters: int = 0

    def record_fixed_point(self, iterations: int) -> None:
        self.fixed_point_iters += iterations
        self.iterative_solves += 1

    def record_newton(self, iterations: int, fallback: bool = False) -> None:
        self.newton_iters += iterations
        self.iterative_solves += 1
        self.max_newton_iters = max(self.max_newton_iters, iterations)
        if fallback:
            self.ladder_fallbacks += 1

    def as_dict(self) -> dict:
        return asdict(self)


def log_solver_usage(method: str, h: float, stats: SolverStats, wall_time: float = 0.0) -> None:
    """Enregistre les compteurs d'un run terminé."""
    entry = {
        "method": method,
        "h": h,
        **stats.as_dict(),
        "wall_time_s": wall_time,
        "timestamp": time.time(),
    }
    with _lock:
        _run_log.append(entry)

    if stats.max_newton_iters > NEWTON_SOFT_LIMIT:
        logger.warning(
            "Solveur [%s] h=%g : jusqu'à %d itérations de Newton par pas (limite souple %d)",
            method, h, stats.max_newton_iters, NEWTON_SOFT_LIMIT,
        )
    logger.debug(
        "Solveur [%s] h=%g : point fixe=%d newton=%d résolutions=%d replis=%d",
        method, h, stats.fixed_point_iters, stats.newton_iters,
        stats.iterative_solves, stats.ladder_fallbacks,
    )


def get_solver_summary() -> dict:
    """Retourne un résumé agrégé des runs enregistrés."""
    with _lock:
        if not _run_log:
            return {
                "total_runs": 0, "fixed_point_iters": 0, "newton_iters": 0,
                "iterative_solves": 0, "ladder_fallbacks": 0,
            }
        return {
            "total_runs": len(_run_log),
            "fixed_point_iters": sum(e["fixed_point_iters"] for e in _run_log),
            "newton_iters": sum(e["newton_iters"] for e in _run_log),
            "iterative_solves": sum(e["iterative_solves"] for e in _run_log),
            "ladder_fallbacks": sum(e["ladder_fallbacks"] for e in _run_log),
            "runs": list(_run_log),
        }


def reset_solver_log() -> None:
    """Réinitialise le journal (utile pour les tests)."""
    with _lock:
        _run_log.clear()
