"""
models.py — Modèles Pydantic v2 pour la validation des configurations d'expérience.

Les valeurs par défaut des blocs de paramètres sont celles des trois exemples
de référence (Klein–Gordon, α-FPU, gKdV).
"""

import math
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

METHOD_IDS = (
    "avf", "sav_cn", "lm_cn", "eisav", "eilm",
    "ssav", "slm", "savf", "seavf", "seisav", "seilm",
)
EXPERIMENTS = ("run", "converge", "efficiency", "energy", "verify")
DEFAULT_H_REF = 2.0 ** -10 / 100.0


def is_integer_multiple(value: float, unit: float, rel_tol: float = 1e-9) -> bool:
    """Vrai si value/unit est entier (à rel_tol près du quotient)."""
    if unit <= 0:
        return False
    ratio = value / unit
    return abs(ratio - round(ratio)) <= rel_tol * max(1.0, abs(ratio)) and round(ratio) >= 1


# ── Contrôles des solveurs ───────────────────────────────────────────────────

class SolverControls(BaseModel):
    """Tolérances et limites d'itération des solveurs itératifs."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    fixed_point_tol: float = 1e-15
    fixed_point_max_iter: int = 200
    newton_tol: float = 1e-15
    newton_max_iter: int = 50
    newton_initial_eta: float = 1.0

    @field_validator("fixed_point_tol", "newton_tol")
    @classmethod
    def tolerance_positive(cls, v):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"Les tolérances doivent être > 0 et finies, reçu {v}")
        return v

    @field_validator("fixed_point_max_iter", "newton_max_iter")
    @classmethod
    def iterations_positive(cls, v):
        if v < 1:
            raise ValueError(f"Le nombre maximal d'itérations doit être ≥ 1, reçu {v}")
        return v


# ── Paramètres physiques ─────────────────────────────────────────────────────

class _Params(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    @model_validator(mode="after")
    def all_finite(self):
        for name, value in self.model_dump().items():
            if isinstance(value, float) and not math.isfinite(value):
                raise ValueError(f"Le paramètre '{name}' doit être fini")
        return self


class KleinGordonParams(_Params):
    """Klein–Gordon amorti : u_tt − κu_xx + ω²u + αu³ + γu_t = 0."""
    omega: float = math.sqrt(0.2)
    kappa: float = 0.04
    alpha: float = -1.0
    gamma: float = 0.1


class AfpuParams(_Params):
    """Chaîne α-FPU amortie."""
    k: int = 1
    epsilon: float = 0.005
    beta: float = 0.01
    gamma: float = 0.5
    m: float = 1.0
    ic_alpha: float = 0.1

    @field_validator("k")
    @classmethod
    def k_at_least_one(cls, v):
        if v < 1:
            raise ValueError(f"L'exposant k doit être un entier ≥ 1, reçu {v}")
        return v


class GkdvParams(_Params):
    """KdV généralisée amortie."""
    sigma: float = 0.001
    epsilon: float = 1.0
    k: int = 2
    mu: float = 0.5

    @field_validator("k")
    @classmethod
    def k_at_least_one(cls, v):
        if v < 1:
            raise ValueError(f"L'exposant k doit être un entier ≥ 1, reçu {v}")
        return v


class GridModel(BaseModel):
    """Domaine [0, L] découpé en N cellules."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    L: float
    N: int

    @field_validator("L")
    @classmethod
    def length_positive(cls, v):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"La longueur L doit être > 0, reçu {v}")
        return v

    @field_validator("N")
    @classmethod
    def enough_cells(cls, v):
        if v < 3:
            raise ValueError(f"Il faut au moins 3 cellules, reçu N={v}")
        return v


# ── Configuration d'expérience ───────────────────────────────────────────────

class ExperimentConfig(BaseModel):
    """Configuration complète d'une expérience (valeurs par défaut déjà remplies)."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    model: Literal["klein_gordon", "afpu", "gkdv"]
    formulation: Optional[Literal["conservative", "dissipative"]] = None
    params: Dict[str, float]
    grid: GridModel
    methods: List[str]
    h_ladder: List[float]
    T: float
    controls: SolverControls = SolverControls()
    sav_shift_C: float = 10.0
    h_ref: float = DEFAULT_H_REF
    reference_check_tol: float = 1e-8
    output_dir: str = "results"
    experiments: List[str] = ["converge"]
    workers: int = 1

    @field_validator("methods")
    @classmethod
    def known_methods(cls, v):
        if not v:
            raise ValueError("La liste des méthodes ne peut pas être vide")
        unknown = [m for m in v if m not in METHOD_IDS]
        if unknown:
            raise ValueError(f"Méthodes inconnues {unknown}, attendues parmi {list(METHOD_IDS)}")
        return v

    @field_validator("experiments")
    @classmethod
    def known_experiments(cls, v):
        if not v:
            raise ValueError("La liste des expériences ne peut pas être vide")
        unknown = [e for e in v if e not in EXPERIMENTS]
        if unknown:
            raise ValueError(f"Expériences inconnues {unknown}, attendues parmi {list(EXPERIMENTS)}")
        return v

    @field_validator("h_ladder")
    @classmethod
    def ladder_positive(cls, v):
        if not v:
            raise ValueError("L'échelle de pas h_ladder ne peut pas être vide")
        if any(not (h > 0 and math.isfinite(h)) for h in v):
            raise ValueError(f"Tous les pas doivent être > 0, reçu {v}")
        return v

    @field_validator("T", "h_ref", "sav_shift_C", "reference_check_tol")
    @classmethod
    def strictly_positive(cls, v, info):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{info.field_name} doit être > 0 et fini, reçu {v}")
        return v

    @field_validator("workers")
    @classmethod
    def workers_positive(cls, v):
        if v < 1:
            raise ValueError(f"workers doit être ≥ 1, reçu {v}")
        return v

    @model_validator(mode="after")
    def ladder_compatible(self):
        h_min = min(self.h_ladder)
        for h in self.h_ladder:
            if not is_integer_multiple(self.T, h):
                raise ValueError(
                    f"Le pas h={h} ne divise pas T={self.T} : choisir h tel que T/h soit entier"
                )
            if not is_integer_multiple(h, self.h_ref):
                raise ValueError(
                    f"Le pas h={h} n'est pas un multiple entier de h_ref={self.h_ref}"
                )
            if not is_integer_multiple(h, h_min):
                raise ValueError(
                    f"Le pas h={h} n'est pas un multiple entier du plus petit pas h={h_min} : "
                    "les instants de la trajectoire ne tomberaient pas sur la grille de référence"
                )
        if self.formulation is not None and self.model != "afpu":
            raise ValueError("Le champ 'formulation' ne s'applique qu'au modèle afpu")
        return self
