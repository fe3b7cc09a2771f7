"""
artifact_exporter.py — Export des tableaux de résultats en CSV et des courbes en SVG (matplotlib).
"""

import csv
import dataclasses
import io
import logging
import math
import os
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from core.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("step", "t", "H", "aux_energy")
CONVERGENCE_COLUMNS = ("method", "h", "error", "observed_order")
EFFICIENCY_COLUMNS = (
    "method", "h", "error", "wall_time_s", "fp_iters", "newton_iters", "iterative_solves", "ladder_fallbacks",
)
ENERGY_ERROR_COLUMNS = ("method", "t", "E_H")

# Texte conservé en <text> dans le SVG (légendes et titres lisibles et cherchables).
SVG_RC = {"svg.fonttype": "none"}


# ── CSV ──────────────────────────────────────────────────────────────────────

def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".16e")
    return str(value)


def _as_mapping(row) -> Mapping:
    if dataclasses.is_dataclass(row):
        return dataclasses.asdict(row)
    if hasattr(row, "_asdict"):
        return row._asdict()
    return row


def export_table_csv(rows: Iterable, columns: Sequence[str]) -> str:
    """Tableau → texte CSV (en-tête puis une ligne par enregistrement, 17 chiffres significatifs)."""
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        mapping = _as_mapping(row)
        writer.writerow([_format_cell(mapping.get(col)) for col in columns])
    return output.getvalue()


def emit_csv(rows: Iterable, path: str, columns: Sequence[str]) -> str:
    """Écrit le tableau dans `path` ; les erreurs d'E/S remontent à l'appelant."""
    content = export_table_csv(rows, columns)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(content)
    logger.debug("CSV écrit : %s", path)
    return path


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path: str) -> List[Dict[str, object]]:
    """Relit un CSV émis par emit_csv en valeurs typées (int, float, str ou None)."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        return [{k: _parse_cell(v) for k, v in row.items()} for row in reader]


def trajectory_rows(traj) -> List[dict]:
    return [
        {"step": rec.step, "t": rec.t, "H": rec.H, "aux_energy": None if math.isnan(rec.aux_energy) else rec.aux_energy}
        for rec in traj.records()
    ]


# ── Figures ──────────────────────────────────────────────────────────────────

def lineplot_figure(
    series: Mapping[str, Tuple[Sequence[float], Sequence[float]]],
    axes: str = "loglog",
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
):
    """
    Construit la figure matplotlib d'un ensemble de courbes.

    En log-log, les points non strictement positifs sont ignorés ; chaque
    courbe tracée porte l'identifiant SVG `courbe_<i>`.
    """
    if axes not in ("linear", "loglog"):
        raise InvalidArgumentError(f"Axes inconnus '{axes}', attendus 'linear' ou 'loglog'")
    log = axes == "loglog"

    fig, ax = plt.subplots(figsize=(7.2, 4.8))
    plotted = 0
    for name, (xs, ys) in series.items():
        x, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if log:
            keep &= (x > 0) & (y > 0)
        if not np.any(keep):
            continue
        ax.plot(x[keep], y[keep], marker="o" if keep.sum() <= 50 else None, linewidth=1.5,
                label=name, gid=f"courbe_{plotted}")
        plotted += 1

    if plotted:
        if log:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.legend(loc="best")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig, plotted


def emit_svg_lineplot(
    series: Mapping[str, Tuple[Sequence[float], Sequence[float]]],
    path: str,
    axes: str = "loglog",
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    """Tracé linéaire ou log-log écrit en SVG dans `path`."""
    with matplotlib.rc_context(SVG_RC):
        fig, plotted = lineplot_figure(series, axes, title, xlabel, ylabel)
        if not plotted:
            logger.warning("Aucune donnée traçable pour %s : axes vides", path)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        try:
            fig.savefig(path, format="svg")
        finally:
            plt.close(fig)
    logger.debug("SVG écrit : %s (%d courbes)", path, plotted)
    return path
