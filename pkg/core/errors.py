"""
errors.py — Hiérarchie d'exceptions du projet.

Toutes les erreurs levées volontairement par la bibliothèque dérivent de
HamsplitError, ce qui permet à la CLI de les convertir en résumé JSON.
"""

from typing import Optional


class HamsplitError(Exception):
    """Erreur de base de la bibliothèque."""


class InvalidArgumentError(HamsplitError, ValueError):
    """Argument invalide : entrée non finie, dimensions incohérentes, pas h ne divisant pas T..."""


class UnsupportedDescriptorError(InvalidArgumentError):
    """Amortissement dépendant du temps fourni sans intégrale en forme close."""


class NumericFailureError(HamsplitError, RuntimeError):
    """Échec numérique : solveur propre, factorisation, résidu hors tolérance."""


class StepFailureError(NumericFailureError):
    """Échec d'un pas d'intégration, avec diagnostics."""

    def __init__(
        self,
        message: str,
        step_index: Optional[int] = None,
        diagnostics: Optional[dict] = None,
    ):
        super().__init__(message)
        self.step_index = step_index
        self.diagnostics = diagnostics or {}

    def with_step(self, step_index: int) -> "StepFailureError":
        """Retourne une copie annotée avec l'indice du pas fautif."""
        return StepFailureError(
            f"Pas {step_index} : {self}",
            step_index=step_index,
            diagnostics=self.diagnostics,
        )
