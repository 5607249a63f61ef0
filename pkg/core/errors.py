# core/errors.py
"""
模擬流程中所有可預期錯誤的例外類別。
同時繼承對應的內建例外，呼叫端可以用 ValueError / RuntimeError 一併捕捉。
"""


class ScqError(Exception):
    """所有本專案例外的基底類別。"""
    category = "runtime-failure"


class CutoffTooSmallError(ScqError, ValueError):
    category = "cutoff-too-small"


class DimensionMismatchError(ScqError, ValueError):
    category = "dimension-mismatch"


class NonFiniteInputError(ScqError, ValueError):
    category = "non-finite-input"


class InvalidParameterError(ScqError, ValueError):
    category = "invalid-parameter"


class StepSizeUnderflowError(ScqError, RuntimeError):
    category = "step-size-underflow"


class InvariantViolationError(ScqError, RuntimeError):
    category = "invariant-violation"


class NonConvergentSeriesError(ScqError, ValueError):
    category = "non-convergent-series"


class RateFitError(ScqError, ValueError):
    category = "rate-fit"

    def __init__(self, message: str, reason: str = "too-few-points"):
        super().__init__(message)
        self.reason = reason


class InsufficientPointsError(RateFitError):
    category = "insufficient-points"

    def __init__(self, message: str):
        super().__init__(message, reason="too-few-points")


class ExpansionMismatchError(ScqError, RuntimeError):
    category = "expansion-mismatch"


class ResonanceError(ScqError, ValueError):
    category = "resonance"


class StudyConfigError(ScqError, ValueError):
    category = "config-invalid"

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
