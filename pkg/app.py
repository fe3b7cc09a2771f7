"""
app.py — Point d'entrée en ligne de commande : expériences sur les systèmes
hamiltoniens amortis (run, converge, efficiency, energy, verify).

Usage : python app.py converge --model klein_gordon
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from pydantic import ValidationError

from core.config import LOG_LEVEL, parse_config, save_config
from core.errors import HamsplitError, StepFailureError
from core.models import ExperimentConfig
from core.solver_stats import get_solver_summary
from export.artifact_exporter import (
    CONVERGENCE_COLUMNS,
    EFFICIENCY_COLUMNS,
    ENERGY_ERROR_COLUMNS,
    TRAJECTORY_COLUMNS,
    emit_csv,
    emit_svg_lineplot,
    trajectory_rows,
)
from harness.experiments import (
    convergence_study,
    efficiency_study,
    energy_study,
    reference_solution,
)
from harness.verification import certification_report
from integrators.driver import get_method, integrate
from pde.catalog import build_from_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_ERROR = 2


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Intégrateurs exponentiels scindés pour systèmes hamiltoniens amortis"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "Intègre chaque méthode au pas le plus fin et écrit les trajectoires"),
        ("converge", "Tableau de convergence contre la solution de référence"),
        ("efficiency", "Erreur en fonction du temps de calcul"),
        ("energy", "Traces d'énergie et contrôle de monotonie"),
        ("verify", "Rapport de certification (ECLD, lemmes, identités)"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", help="Fichier de configuration JSON")
        sub.add_argument("--model", choices=["klein_gordon", "afpu", "gkdv"])
        sub.add_argument("--formulation", choices=["conservative", "dissipative"])
        sub.add_argument("--methods", type=_str_list, help="Liste séparée par des virgules")
        sub.add_argument("--h-ladder", dest="h_ladder", type=_float_list, help="Pas séparés par des virgules")
        sub.add_argument("--T", dest="T", type=float)
        sub.add_argument("--h-ref", dest="h_ref", type=float)
        sub.add_argument("--sav-shift-C", dest="sav_shift_C", type=float)
        sub.add_argument("--check-tol", dest="reference_check_tol", type=float)
        sub.add_argument("--workers", type=int)
        sub.add_argument("--out", dest="output_dir")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        key: getattr(args, key)
        for key in ("formulation", "methods", "h_ladder", "T", "h_ref", "sav_shift_C",
                    "reference_check_tol", "workers", "output_dir")
    }
    overrides["experiments"] = [args.command]
    return parse_config(args.config, overrides=overrides, model=args.model)


def _out(config: ExperimentConfig, name: str) -> str:
    return os.path.join(config.output_dir, name)


def _reference(config: ExperimentConfig, system):
    stride = int(round(min(config.h_ladder) / config.h_ref))
    return reference_solution(
        system, system.z0, config.T, config.h_ref,
        model_id=config.model,
        controls=config.controls,
        record_every=stride,
        check_tol=config.reference_check_tol,
    )


# ── Commandes ────────────────────────────────────────────────────────────────

def cmd_run(config: ExperimentConfig) -> dict:
    system = build_from_config(config)
    h = min(config.h_ladder)
    series = {}
    for method in config.methods:
        traj = integrate(system, method, system.z0, h, config.T, config.controls)
        emit_csv(trajectory_rows(traj), _out(config, f"trajectory_{method}.csv"), TRAJECTORY_COLUMNS)
        series[method] = (traj.times, traj.H)
    emit_svg_lineplot(series, _out(config, "energy.svg"), axes="linear",
                      title=f"{config.model} : H(zⁿ), h={h:g}", xlabel="t", ylabel="H")
    return {"status": "ok", "h": h, "methods": list(config.methods)}


def cmd_converge(config: ExperimentConfig) -> dict:
    system = build_from_config(config)
    ref = _reference(config, system)
    table = convergence_study(system, config.methods, config.h_ladder, config.T, ref,
                              config.controls, workers=config.workers)
    rows = [row for method in config.methods for row in table[method]]
    emit_csv(rows, _out(config, "convergence.csv"), CONVERGENCE_COLUMNS)
    emit_svg_lineplot(
        {m: ([r.h for r in table[m]], [r.error for r in table[m]]) for m in config.methods},
        _out(config, "convergence.svg"), axes="loglog",
        title=f"{config.model} : ordre de convergence", xlabel="h", ylabel="erreur max",
    )
    orders = {m: [r.observed_order for r in table[m] if r.observed_order is not None] for m in config.methods}
    return {"status": "ok", "observed_orders": orders}


def cmd_efficiency(config: ExperimentConfig) -> dict:
    system = build_from_config(config)
    ref = _reference(config, system)
    rows = efficiency_study(system, config.methods, config.h_ladder, config.T, ref, config.controls)
    emit_csv(rows, _out(config, "efficiency.csv"), EFFICIENCY_COLUMNS)
    emit_svg_lineplot(
        {m: ([r.wall_time_s for r in rows if r.method == m], [r.error for r in rows if r.method == m])
         for m in config.methods},
        _out(config, "efficiency.svg"), axes="loglog",
        title=f"{config.model} : efficacité", xlabel="temps (s)", ylabel="erreur max",
    )
    solves = {m: sum(r.iterative_solves for r in rows if r.method == m) for m in config.methods}
    seisav_solves = solves.get("seisav", 0)
    implicit = {m: solves[m] for m in config.methods if get_method(m).iterative}
    # SEISAV sans résolution itérative, baselines implicites avec au moins une.
    passed = seisav_solves == 0 and all(n > 0 for n in implicit.values())
    return {
        "status": "ok" if passed else "failed",
        "seisav_iterative_solves": seisav_solves,
        "implicit_iterative_solves": implicit,
    }


def cmd_energy(config: ExperimentConfig) -> dict:
    system = build_from_config(config)
    ref = _reference(config, system)
    h = min(config.h_ladder)
    results = energy_study(system, config.methods, h, config.T, ref, config.controls, workers=config.workers)
    error_rows = [row for method in config.methods for row in results[method].energy_errors]
    emit_csv(error_rows, _out(config, "energy_errors.csv"), ENERGY_ERROR_COLUMNS)
    for method in config.methods:
        emit_csv(trajectory_rows(results[method].trajectory), _out(config, f"trajectory_{method}.csv"), TRAJECTORY_COLUMNS)
    emit_svg_lineplot(
        {m: (results[m].trajectory.times, results[m].trajectory.tracked_energy) for m in config.methods},
        _out(config, "energy.svg"), axes="linear",
        title=f"{config.model} : énergie suivie, h={h:g}", xlabel="t", ylabel="H ou H̃",
    )
    emit_svg_lineplot(
        {m: ([r.t for r in results[m].energy_errors][1:], [r.E_H for r in results[m].energy_errors][1:])
         for m in config.methods},
        _out(config, "energy_error.svg"), axes="loglog",
        title=f"{config.model} : erreur d'énergie", xlabel="t", ylabel="|H − H_ref|",
    )
    violations = {
        m: {"column": results[m].tracked_column, "violations": results[m].violations,
            "max_increment": results[m].max_increment}
        for m in config.methods
    }
    # Décroissance attendue pour toute méthode applicable.
    failed = any(v["violations"] > 0 for v in violations.values())
    return {"status": "failed" if failed else "ok", "monotonicity": violations}


def cmd_verify(config: ExperimentConfig) -> dict:
    system = build_from_config(config)
    report = certification_report(system, model_id=config.model, h=max(config.h_ladder), controls=config.controls)
    os.makedirs(config.output_dir, exist_ok=True)
    with open(_out(config, "verify.json"), "w", encoding="utf-8") as f:
        json.dump(report, f, ensure_ascii=False, indent=2, default=float)
    return {"status": "ok" if report["passed"] else "failed", "report": report}


COMMANDS = {
    "run": cmd_run,
    "converge": cmd_converge,
    "efficiency": cmd_efficiency,
    "energy": cmd_energy,
    "verify": cmd_verify,
}


def _error_summary(error: Exception) -> dict:
    diagnostics = {}
    if isinstance(error, StepFailureError):
        diagnostics = {"step_index": error.step_index, **error.diagnostics}
    elif isinstance(error, ValidationError):
        diagnostics = {"errors": [e["msg"] for e in error.errors()]}
    return {"status": "error", "kind": type(error).__name__, "message": str(error), "diagnostics": diagnostics}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s : %(message)s",
    )
    try:
        config = load_config(args)
        os.makedirs(config.output_dir, exist_ok=True)
        save_config(config, _out(config, f"config_{args.command}.json"))
        result = COMMANDS[args.command](config)
    except (HamsplitError, ValidationError) as e:
        logger.error("Échec de la commande %s : %s", args.command, e)
        print(json.dumps(_error_summary(e), ensure_ascii=False, default=str), file=sys.stderr)
        return EXIT_ERROR

    result["solver_summary"] = {k: v for k, v in get_solver_summary().items() if k != "runs"}
    print(json.dumps(result, ensure_ascii=False, indent=2, default=float))
    if result["status"] != "ok":
        print(json.dumps({"status": "failed", "kind": "CheckFailure", "message": f"Contrôle en échec : {args.command}",
                          "diagnostics": {}}, ensure_ascii=False), file=sys.stderr)
        return EXIT_FAILED_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
