"""Tests pour core/config.py et core/models.py — Validation Pydantic."""

import json
import math

import pytest
from pydantic import ValidationError

from core.config import parse_config, save_config, serialize_config
from core.errors import InvalidArgumentError
from core.models import (
    DEFAULT_H_REF,
    GridModel,
    KleinGordonParams,
    SolverControls,
    is_integer_multiple,
)
from pde.catalog import DEFAULT_METHODS_ABSORBABLE, SPLIT_METHODS


class TestDefaults:
    def test_klein_gordon(self):
        config = parse_config(model="klein_gordon")
        assert config.params["omega"] == pytest.approx(math.sqrt(0.2))
        assert config.params["gamma"] == 0.1
        assert config.grid.N == 20
        assert config.T == 50.0
        assert config.h_ladder == [2.0 ** -5, 2.0 ** -6, 2.0 ** -7, 2.0 ** -8]
        assert config.methods == list(DEFAULT_METHODS_ABSORBABLE)
        assert config.h_ref == DEFAULT_H_REF
        assert config.sav_shift_C == 10.0
        assert config.formulation is None

    def test_afpu_default_formulation(self):
        config = parse_config(model="afpu")
        assert config.formulation == "conservative"
        assert config.params["epsilon"] == 0.005

    def test_gkdv(self):
        config = parse_config(model="gkdv")
        assert config.methods == list(SPLIT_METHODS)
        assert config.grid.L == 10.0
        assert config.h_ladder[0] == 2.0 ** -6

    def test_overrides_win(self):
        config = parse_config(
            {"model": "klein_gordon", "T": 2.0},
            overrides={"T": 1.0, "methods": ["seisav"], "h_ladder": [0.25], "workers": None},
        )
        assert config.T == 1.0
        assert config.methods == ["seisav"]
        assert config.workers == 1

    def test_params_merge(self):
        config = parse_config({"model": "klein_gordon", "params": {"gamma": 0.0}})
        assert config.params["gamma"] == 0.0
        assert config.params["kappa"] == 0.04


class TestRejections:
    def test_unsplit_method_on_gkdv(self):
        with pytest.raises(InvalidArgumentError, match="non applicables"):
            parse_config({"model": "gkdv", "methods": ["avf"]})

    def test_unsplit_allowed_on_undamped_gkdv(self):
        config = parse_config({"model": "gkdv", "methods": ["avf"], "params": {"mu": 0.0}})
        assert config.methods == ["avf"]

    def test_step_not_dividing_horizon(self):
        with pytest.raises(ValidationError, match="ne divise pas"):
            parse_config({"model": "klein_gordon", "h_ladder": [0.3], "T": 1.0})

    def test_step_not_multiple_of_reference(self):
        with pytest.raises(ValidationError, match="h_ref"):
            parse_config({"model": "klein_gordon", "h_ladder": [0.25], "T": 1.0, "h_ref": 0.2})

    def test_ladder_not_multiple_of_finest_step(self):
        with pytest.raises(ValidationError, match="plus petit pas"):
            parse_config({"model": "klein_gordon", "h_ladder": [0.3, 0.2], "T": 0.6, "h_ref": 0.1})

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            parse_config({"model": "klein_gordon", "colour": "blue"})

    def test_unknown_method(self):
        with pytest.raises(ValidationError, match="Méthodes inconnues"):
            parse_config({"model": "klein_gordon", "methods": ["rk4"]})

    def test_formulation_outside_afpu(self):
        with pytest.raises(ValidationError, match="afpu"):
            parse_config({"model": "klein_gordon", "formulation": "dissipative"})

    def test_missing_model(self):
        with pytest.raises(InvalidArgumentError, match="Aucun modèle"):
            parse_config({})

    def test_unknown_model(self):
        with pytest.raises(InvalidArgumentError, match="Modèle inconnu"):
            parse_config(model="heat")

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidArgumentError, match="introuvable"):
            parse_config(str(tmp_path / "absent.json"))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{model: ", encoding="utf-8")
        with pytest.raises(InvalidArgumentError, match="JSON invalide"):
            parse_config(str(path))


class TestSerialization:
    @pytest.mark.parametrize("model", ["klein_gordon", "afpu", "gkdv"])
    def test_round_trip(self, model):
        config = parse_config(model=model)
        assert parse_config(serialize_config(config)) == config

    def test_save_and_reload(self, tmp_path):
        config = parse_config({"model": "afpu", "formulation": "dissipative", "methods": ["seisav", "seilm"]})
        path = str(tmp_path / "cfg" / "config.json")
        save_config(config, path)
        with open(path, encoding="utf-8") as f:
            assert json.load(f)["formulation"] == "dissipative"
        assert parse_config(path) == config


class TestModels:
    def test_solver_controls_defaults(self):
        controls = SolverControls()
        assert controls.fixed_point_tol == 1e-15
        assert controls.newton_max_iter == 50

    def test_solver_controls_rejects_negative_tolerance(self):
        with pytest.raises(ValidationError, match="tolérances"):
            SolverControls(newton_tol=-1.0)

    def test_params_must_be_finite(self):
        with pytest.raises(ValidationError, match="fini"):
            KleinGordonParams(gamma=math.inf)

    def test_grid_needs_three_cells(self):
        with pytest.raises(ValidationError, match="3 cellules"):
            GridModel(L=1.0, N=2)

    def test_integer_multiple(self):
        assert is_integer_multiple(0.3, 0.1)
        assert is_integer_multiple(50.0, 2.0 ** -8)
        assert not is_integer_multiple(1.0, 0.3)
        assert not is_integer_multiple(0.05, 0.1)
        assert not is_integer_multiple(1.0, 0.0)
