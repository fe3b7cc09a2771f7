"""
config.py — Environnement et chargement des configurations d'expérience.

Ordre de priorité : valeurs par défaut du modèle < fichier JSON < options CLI.
"""

import json
import logging
import os
from typing import Optional, Union

from dotenv import load_dotenv

from core.errors import InvalidArgumentError
from core.models import ExperimentConfig

load_dotenv()

logger = logging.getLogger(__name__)

CACHE_DIR = os.getenv("HAMSPLIT_CACHE_DIR", os.path.join("shared_data", "reference_cache"))
OUTPUT_DIR = os.getenv("HAMSPLIT_OUTPUT_DIR", "results")
LOG_LEVEL = os.getenv("HAMSPLIT_LOG_LEVEL", "INFO")
WORKERS = int(os.getenv("HAMSPLIT_WORKERS", "1"))


def _load_json(path: str) -> dict:
    if not os.path.exists(path):
        raise InvalidArgumentError(f"Fichier de configuration introuvable : {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise InvalidArgumentError(f"Configuration JSON invalide ({path}) : {e}") from e
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"La configuration {path} doit être un objet JSON")
    return data


def _merge_overrides(data: dict, overrides: Optional[dict]) -> dict:
    """Applique les options non nulles ; les sous-dictionnaires sont fusionnés."""
    merged = dict(data)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return merged


def parse_config(
    source: Union[str, dict, None] = None,
    overrides: Optional[dict] = None,
    model: Optional[str] = None,
) -> ExperimentConfig:
    """
    Construit une ExperimentConfig complète.

    `source` est un chemin de fichier JSON, un dictionnaire déjà chargé ou None.
    Les champs omis reçoivent les valeurs par défaut du modèle choisi.
    Lève InvalidArgumentError (modèle inconnu, méthode non applicable) ou
    pydantic.ValidationError (champ inconnu, divisibilité des pas).
    """
    from pde.catalog import applicable_methods, get_model_entry

    if isinstance(source, str):
        data = _load_json(source)
    else:
        data = dict(source or {})
    data = _merge_overrides(data, overrides)
    if model is not None:
        data["model"] = model
    model_id = data.get("model")
    if model_id is None:
        raise InvalidArgumentError("Aucun modèle indiqué : utiliser --model ou le champ 'model'")

    entry = get_model_entry(model_id)
    params = entry.params_model(**(data.get("params") or {}))
    data["params"] = params.model_dump()
    data["grid"] = {**entry.default_grid, **(data.get("grid") or {})}
    data.setdefault("methods", list(entry.default_methods))
    data.setdefault("h_ladder", list(entry.default_h_ladder))
    data.setdefault("T", entry.default_T)
    data.setdefault("output_dir", OUTPUT_DIR)
    data.setdefault("workers", WORKERS)
    if model_id == "afpu":
        data.setdefault("formulation", "conservative")

    config = ExperimentConfig.model_validate(data)

    allowed = applicable_methods(config.model, config.params)
    rejected = [m for m in config.methods if m not in allowed]
    if rejected:
        raise InvalidArgumentError(
            f"Méthodes {rejected} non applicables au modèle '{config.model}' : "
            "l'amortissement ne peut pas être absorbé dans l'opérateur de structure "
            f"(méthodes possibles : {allowed})"
        )
    logger.debug("Configuration chargée : modèle=%s, méthodes=%s", config.model, config.methods)
    return config


def serialize_config(config: ExperimentConfig) -> dict:
    """Dictionnaire JSON tel que parse_config(serialize_config(c)) == c."""
    return config.model_dump(mode="json")


def save_config(config: ExperimentConfig, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(serialize_config(config), f, ensure_ascii=False, indent=2)
