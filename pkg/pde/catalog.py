"""
catalog.py — Registre des modèles : constructeur, paramètres et réglages par défaut.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Tuple, Type

from pydantic import BaseModel

from core.errors import InvalidArgumentError
from core.models import AfpuParams, GkdvParams, KleinGordonParams, METHOD_IDS
from core.system import DEFAULT_SAV_SHIFT, SemidiscreteSystem
from pde.afpu import build_afpu
from pde.gkdv import build_gkdv
from pde.grids import GridSpec
from pde.klein_gordon import build_klein_gordon

logger = logging.getLogger(__name__)

SPLIT_METHODS = ("savf", "seavf", "ssav", "slm", "seisav", "seilm")
DEFAULT_METHODS_ABSORBABLE = ("avf", "sav_cn", "savf", "seavf", "ssav", "slm", "seisav", "seilm")


@dataclass(frozen=True)
class ModelEntry:
    model_id: str
    boundary: str
    params_model: Type[BaseModel]
    builder: Callable[..., SemidiscreteSystem]
    default_grid: Dict[str, float] = field(default_factory=dict)
    default_T: float = 50.0
    default_h_ladder: Tuple[float, ...] = ()
    default_methods: Tuple[str, ...] = ()


MODEL_CATALOG: Dict[str, ModelEntry] = {
    "klein_gordon": ModelEntry(
        model_id="klein_gordon",
        boundary="periodic",
        params_model=KleinGordonParams,
        builder=build_klein_gordon,
        default_grid={"L": 2.0, "N": 20},
        default_h_ladder=tuple(2.0 ** -(j + 4) for j in range(1, 5)),
        default_methods=DEFAULT_METHODS_ABSORBABLE,
    ),
    "afpu": ModelEntry(
        model_id="afpu",
        boundary="dirichlet",
        params_model=AfpuParams,
        builder=build_afpu,
        default_grid={"L": 2.0, "N": 20},
        default_h_ladder=tuple(2.0 ** -(j + 4) for j in range(1, 5)),
        default_methods=DEFAULT_METHODS_ABSORBABLE,
    ),
    "gkdv": ModelEntry(
        model_id="gkdv",
        boundary="periodic",
        params_model=GkdvParams,
        builder=build_gkdv,
        default_grid={"L": 10.0, "N": 20},
        default_h_ladder=tuple(2.0 ** -(j + 5) for j in range(1, 5)),
        default_methods=SPLIT_METHODS,
    ),
}

MODEL_IDS = tuple(MODEL_CATALOG)


def get_model_entry(model_id: str) -> ModelEntry:
    entry = MODEL_CATALOG.get(model_id)
    if entry is None:
        raise InvalidArgumentError(f"Modèle inconnu '{model_id}', attendu parmi {list(MODEL_CATALOG)}")
    return entry


def applicable_methods(model_id: str, params: Optional[Mapping] = None) -> list:
    """Méthodes utilisables : les non scindées seulement si l'amortissement est absorbable."""
    entry = get_model_entry(model_id)
    if model_id == "gkdv":
        mu = entry.params_model(**(params or {})).mu
        if mu != 0.0:
            return list(SPLIT_METHODS)
    return list(METHOD_IDS)


def build_system(
    model_id: str,
    params: Optional[Mapping] = None,
    grid: Optional[Mapping] = None,
    formulation: Optional[str] = None,
    sav_shift: float = DEFAULT_SAV_SHIFT,
) -> SemidiscreteSystem:
    """Construit le système d'un modèle ; les champs omis prennent les valeurs par défaut."""
    entry = get_model_entry(model_id)
    model_params = entry.params_model(**(params or {}))
    grid_values = {**entry.default_grid, **(grid or {})}
    grid_spec = GridSpec(L=float(grid_values["L"]), N=int(grid_values["N"]), boundary=entry.boundary)
    if model_id == "afpu":
        system = entry.builder(grid_spec, model_params, formulation or "conservative", sav_shift=sav_shift)
    else:
        if formulation is not None:
            raise InvalidArgumentError("Le paramètre 'formulation' ne s'applique qu'au modèle afpu")
        system = entry.builder(grid_spec, model_params, sav_shift=sav_shift)
    logger.debug("Système %s construit (d=%d)", system.label, system.dim)
    return system


def build_from_config(config) -> SemidiscreteSystem:
    """Système décrit par une ExperimentConfig."""
    return build_system(
        config.model,
        params=config.params,
        grid={"L": config.grid.L, "N": config.grid.N},
        formulation=config.formulation,
        sav_shift=config.sav_shift_C,
    )
