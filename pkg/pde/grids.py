"""
grids.py — Grilles uniformes 1-D et opérateurs de différences centrées.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.errors import InvalidArgumentError

BOUNDARIES = ("periodic", "dirichlet")


@dataclass(frozen=True)
class GridSpec:
    """[0, L] découpé en N cellules de pas dx = L/N."""
    L: float
    N: int
    boundary: str = "periodic"

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise InvalidArgumentError(f"Condition aux limites inconnue : {self.boundary}")
        if int(self.N) != self.N or self.N < 3:
            raise InvalidArgumentError(f"Il faut N ≥ 3 cellules entières, reçu N={self.N}")
        if not (self.L > 0 and np.isfinite(self.L)):
            raise InvalidArgumentError(f"La longueur L doit être > 0, reçu {self.L}")

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def size(self) -> int:
        """Nombre d'inconnues : N (périodique, x_N ≡ x_0) ou N−1 nœuds intérieurs."""
        return self.N if self.boundary == "periodic" else self.N - 1

    def nodes(self) -> np.ndarray:
        """x_j = j·dx, j = 1..N (périodique) ou j = 1..N−1 (Dirichlet)."""
        return np.arange(1, self.size + 1) * self.dx


def difference_ops(grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Retourne (D1, R) : dérivée première centrée (antisymétrique) et
    laplacien discret à trois points, mis à l'échelle par 1/dx et 1/dx².
    """
    n = grid.size
    eye = np.eye(n)
    if grid.boundary == "periodic":
        forward = np.roll(eye, 1, axis=1)
        backward = np.roll(eye, -1, axis=1)
    else:
        forward = np.eye(n, k=1)
        backward = np.eye(n, k=-1)
    D1 = (forward - backward) / (2.0 * grid.dx)
    R = (forward + backward - 2.0 * eye) / grid.dx ** 2
    return D1, R
