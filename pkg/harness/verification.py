"""
verification.py — Rapport de certification d'un système : condition ECLD,
propriétés d'ordre de Loewner des propagateurs et identités algébriques.
"""

import logging
from typing import Dict, Optional

import numpy as np

from core.matfun import check_psd, damping_propagator, expm, phi1_residual, sym_part
from core.models import SolverControls
from core.system import SemidiscreteSystem, check_ecld, gradient_consistency_error
from integrators.driver import integrate
from integrators.propagators import build_cache

logger = logging.getLogger(__name__)

ECLD_TOL = 1e-10
LOEWNER_TOL = 1e-9
GRADIENT_TOL = 1e-6
ABSORPTION_TOL = 1e-12
SAMPLE_TIMES = (0.5, 1.0, 5.0)
MOMENTUM_DAMPED_MODELS = ("klein_gordon", "afpu")


def _min_eig(A: np.ndarray) -> float:
    return check_psd(A, tol=0.0).min_eigenvalue


def _section(passed: bool, **details) -> dict:
    return {"passed": bool(passed), **details}


def ecld_static(sys: SemidiscreteSystem, t: float = 0.0, tol: float = ECLD_TOL) -> dict:
    """sym(M·D(t)) ⪰ 0 : la condition ECLD quand H est quadratique."""
    verdict = check_psd(sym_part(sys.M @ sys.damping.at(t)), tol)
    return _section(verdict.is_psd, min_eigenvalue=verdict.min_eigenvalue, tolerance=verdict.tolerance_used)


def ecld_sampled(sys: SemidiscreteSystem, states: np.ndarray, times: np.ndarray, asserted: bool, tol: float = ECLD_TOL) -> dict:
    """sym(P_H(z)D(t)) ⪰ 0 aux états échantillonnés ; informatif seulement si asserted=False."""
    verdicts = [check_ecld(sys, z, float(t), tol) for z, t in zip(states, times)]
    all_psd = all(v.is_psd for v in verdicts)
    return _section(
        all_psd or not asserted,
        asserted=asserted,
        all_psd=all_psd,
        samples=len(verdicts),
        min_eigenvalue=min(v.min_eigenvalue for v in verdicts),
    )


def damping_lemma(sys: SemidiscreteSystem, times=SAMPLE_TIMES, tol: float = LOEWNER_TOL) -> dict:
    """Γᵀ M Γ ⪯ M et M ⪯ Γ⁻ᵀ M Γ⁻¹ pour Γ = propagateur de l'amortissement sur [0, t]."""
    scale = tol * max(1.0, np.linalg.norm(sys.M, 2))
    worst = np.inf
    for t in times:
        gamma = damping_propagator(sys.damping, 0.0, t)
        gamma_inv = np.linalg.inv(gamma)
        worst = min(
            worst,
            _min_eig(sys.M - gamma.T @ sys.M @ gamma),
            _min_eig(gamma_inv.T @ sys.M @ gamma_inv - sys.M),
        )
    return _section(worst >= -scale, min_eigenvalue=float(worst), tolerance=float(scale))


def flow_lemma(sys: SemidiscreteSystem, h: float, tol: float = LOEWNER_TOL) -> dict:
    """B(h) = e^{hSM}ᵀ M e^{hSM} − M : nulle si S antisymétrique, ⪯ 0 si sym(S) ⪯ 0."""
    E = expm(h * sys.SM)
    B = E.T @ sys.M @ E - sys.M
    scale = tol * max(1.0, np.linalg.norm(sys.M, 2))
    skew = np.max(np.abs(sys.S + sys.S.T)) <= 1e-14 * max(1.0, np.max(np.abs(sys.S)))
    if skew:
        deviation = float(np.max(np.abs(B)))
        return _section(deviation <= scale, branch="skew", deviation=deviation, tolerance=float(scale))
    contractive = _min_eig(-sym_part(sys.S)) >= -1e-12 * max(1.0, np.linalg.norm(sys.S, 2))
    min_eig = _min_eig(-B)
    return _section(contractive and min_eig >= -scale, branch="contractive", min_eigenvalue=min_eig, tolerance=float(scale))


def absorption(sys: SemidiscreteSystem, rng: np.random.Generator, samples: int = 10) -> dict:
    """S_c∇H(z) = S∇H(z) − Dz aux états aléatoires."""
    if sys.combined_S is None:
        return _section(True, applicable=False)
    worst = 0.0
    for _ in range(samples):
        z = rng.standard_normal(sys.dim) * 0.1
        grad = sys.grad_energy(z)
        lhs = sys.combined_S @ grad
        rhs = sys.S @ grad - sys.damping.at(0.0) @ z
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / (1.0 + np.max(np.abs(rhs)))))
    return _section(worst <= ABSORPTION_TOL, applicable=True, max_relative_gap=worst)


def gradient_consistency(sys: SemidiscreteSystem, rng: np.random.Generator, samples: int = 20) -> dict:
    base = sys.z0 if sys.z0 is not None else np.zeros(sys.dim)
    worst = max(
        gradient_consistency_error(sys, base + 0.1 * rng.standard_normal(sys.dim))
        for _ in range(samples)
    )
    return _section(worst <= GRADIENT_TOL, max_error=worst)


def cache_residuals(sys: SemidiscreteSystem, h: float) -> dict:
    cache = build_cache(sys, h)
    full = phi1_residual(cache.A, cache.E, cache.Phi1)
    half = phi1_residual(0.5 * cache.A, cache.E_half, cache.Phi1_half)
    return _section(max(full, half) <= 1e-12, phi1_residual=full, phi1_half_residual=half)


def certification_report(
    sys: SemidiscreteSystem,
    model_id: Optional[str] = None,
    h: float = 2.0 ** -5,
    sample_T: float = 1.0,
    controls: Optional[SolverControls] = None,
    seed: int = 0,
) -> Dict[str, object]:
    """Toutes les sections de certification ; `passed` vaut vrai si chacune passe."""
    model_id = model_id or sys.label
    rng = np.random.default_rng(seed)
    sample = integrate(sys, "seilm", sys.z0, h, sample_T, controls, record_every=max(1, int(round(sample_T / h)) // 8))
    sections = {
        "ecld_static": ecld_static(sys),
        "ecld_sampled": ecld_sampled(sys, sample.states, sample.times, asserted=model_id.startswith(MOMENTUM_DAMPED_MODELS)),
        "damping_lemma": damping_lemma(sys),
        "flow_lemma": flow_lemma(sys, h),
        "absorption": absorption(sys, rng),
        "gradient_consistency": gradient_consistency(sys, rng),
        "cache_residuals": cache_residuals(sys, h),
    }
    passed = all(s["passed"] for s in sections.values())
    for name, section in sections.items():
        if not section["passed"]:
            logger.warning("Certification %s : section %s en échec (%s)", model_id, name, section)
    logger.info("Certification %s : %s", model_id, "OK" if passed else "ÉCHEC")
    return {"model": model_id, "system": sys.label, "passed": passed, "sections": sections}
