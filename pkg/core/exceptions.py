"""
Exceptions du projet

Chaque erreur porte un `detail` lisible et le code de sortie de la CLI :
1 pour les erreurs de validation, 2 pour les erreurs d'entrée/sortie.
"""

from typing import Optional


class CicmapError(Exception):
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidArgumentError(CicmapError, ValueError):
    pass


class FormatError(CicmapError):
    """Fichier ou raster dans un format non supporté"""


class ParseError(FormatError):
    def __init__(self, detail: str, line: Optional[int] = None):
        if line is not None:
            detail = f"ligne {line}: {detail}"
        super().__init__(detail)
        self.line = line


class DescriptorValidationError(CicmapError):
    def __init__(self, detail: str, line: Optional[int] = None):
        if line is not None:
            detail = f"ligne {line}: {detail}"
        super().__init__(detail)
        self.line = line


class UndefinedProbabilityError(CicmapError):
    pass


class ModelError(CicmapError):
    pass


class EmptyModelError(ModelError):
    """Aucune caractéristique d'évidence acceptée (patchs insuffisants ou non séparables)"""

    def __init__(self, detail: str, round_index: Optional[int] = None):
        if round_index is not None:
            detail = f"round {round_index}: {detail}"
        super().__init__(detail)
        self.round_index = round_index


class ConfigurationError(CicmapError):
    pass


class SelectionStateError(CicmapError):
    pass


class EvaluationError(CicmapError):
    pass


class SpecError(CicmapError):
    pass


class StorageError(CicmapError):
    exit_code = 2


class LabelError(CicmapError):
    """Étiquettes de patchs inutilisables (classe manquante, trop peu de patchs)"""
