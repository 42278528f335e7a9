"""
Custom exceptions for ctxcat
"""
from typing import Optional


class CtxcatError(Exception):
    """Base exception for ctxcat"""

    module = "ctxcat"


class ConfigError(CtxcatError):
    """Invalid configuration value or file"""

    module = "config"


class ManifestParseError(CtxcatError):
    """Malformed manifest row"""

    module = "datamodel"

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DatasetValidationError(CtxcatError):
    """Dataset violates a structural invariant"""

    module = "datamodel"


class InsufficientItemsError(DatasetValidationError):
    """Not enough items of a class to draw the labeled set"""

    def __init__(self, context_id: str, class_name: str, available: int, needed: int):
        self.context_id = context_id
        self.class_name = class_name
        super().__init__(
            f"context '{context_id}': class '{class_name}' has {available} items, "
            f"{needed} needed"
        )


class VocabularyError(CtxcatError):
    """Invalid vocabulary file or class partition"""

    module = "datamodel"


class PlacementError(CtxcatError):
    """Glyphs cannot be placed without overlap"""

    module = "synthgen"


class DegenerateLexiconError(CtxcatError):
    """Lexicon vector cannot be normalized"""

    module = "synthgen"


class LexiconLookupError(CtxcatError, KeyError):
    """Class name absent from the lexicon"""

    module = "backbone"

    def __str__(self) -> str:
        return Exception.__str__(self)


class NumericError(CtxcatError):
    """Non-finite activations or values"""

    module = "backbone"


class IntegrityError(CtxcatError):
    """Frozen weight digest mismatch"""

    module = "backbone"


class LossUndefinedError(CtxcatError):
    """Loss has no valid terms for the given batch"""

    module = "objectives"


class DegenerateDataError(CtxcatError):
    """Clustering input cannot support the requested structure"""

    module = "discovery"


class AssignmentError(CtxcatError):
    """Invalid assignment problem"""

    module = "discovery"


class TrainingDivergedError(CtxcatError):
    """Loss became non-finite during training"""

    module = "training"

    def __init__(self, epoch: int, step: int, value: float):
        self.epoch = epoch
        self.step = step
        self.value = value
        super().__init__(f"non-finite loss {value} at epoch {epoch}, step {step}")


class CheckpointError(CtxcatError):
    """Unreadable or inconsistent checkpoint"""

    module = "training"


class EvaluationError(CtxcatError):
    """Invalid evaluation input"""

    module = "evaluation"


class UnreliableMetricError(EvaluationError):
    """Metric has an empty evaluation set"""


class ReportSchemaError(EvaluationError):
    """Reports do not share a schema"""

    module = "cli"
