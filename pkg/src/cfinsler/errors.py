"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all cfinsler errors."""


class DomainError(EngineError):
    """Evaluation outside the domain of definition (e.g. |z| >= 1 on the disk)."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class SingularEvaluationError(EngineError):
    """Division by a jet whose constant term vanishes."""


class DegenerateMetricError(EngineError):
    """Levi matrix singular or not positive definite where it must be."""


class NotAMetricError(EngineError):
    """Expression does not define a real-valued (or positive) metric."""


class InvalidCurveError(EngineError):
    """Curve fails regularity (vanishing tangent) on the requested interval."""


class StiffnessError(EngineError):
    """Adaptive step-size underflow during geodesic integration."""


class DslError(EngineError):
    """Parse error in the metric expression language, with source position."""

    def __init__(self, message, line, col):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
