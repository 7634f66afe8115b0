"""
Error hierarchy for ctkkt. Every error carries the CLI exit code it maps to.
"""


class CtkktError(Exception):
    """Base class for all ctkkt errors."""

    exit_code = 1


# ===== Expression language =====

class ExprSyntaxError(CtkktError):
    """Malformed expression text."""

    def __init__(self, message, offset, text=None):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at byte {offset}")


class UnknownIdentifierError(ExprSyntaxError):
    """Identifier that is neither t, z<k> nor a known function."""


class VariableRangeError(ExprSyntaxError):
    """z<k> with k outside 1..n."""


class ExprDomainError(CtkktError):
    """log of non-positive, sqrt of negative, division by zero, overflow."""

    def __init__(self, message, node_text=None, offset=None, label=None):
        self.reason = message
        self.node_text = node_text
        self.offset = offset
        self.label = label
        parts = [message]
        if node_text is not None:
            parts.append(f"in '{node_text}'")
        if offset is not None:
            parts.append(f"(source byte {offset})")
        if label is not None:
            parts.append(f"[{label}]")
        super().__init__(" ".join(parts))

    def with_label(self, label):
        return ExprDomainError(
            self.reason,
            node_text=self.node_text,
            offset=self.offset,
            label=label,
        )


# ===== Model =====

class ProblemFormatError(CtkktError):
    """Problem file that does not follow the schema."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionError(CtkktError):
    """Shapes that do not agree."""


# ===== Certification =====

class CQFailure(CtkktError):
    """Constraint gradients numerically rank deficient at a node."""

    exit_code = 2

    def __init__(self, message, report=None, t=None):
        self.report = report
        self.t = t
        super().__init__(message)


class InactiveConstraintError(CtkktError):
    """A constraint index that is not in the active set."""


class InfeasibleError(CtkktError):
    """Trajectory violates the constraints beyond tolerance."""

    exit_code = 5


class AsymmetricMatrixError(CtkktError):
    """Matrix passed as symmetric is not."""


# ===== Solver =====

class SolverError(CtkktError):
    """No feasible point found."""

    exit_code = 6

    def __init__(self, message, best_infeasibility=None):
        self.best_infeasibility = best_infeasibility
        super().__init__(message)


__all__ = [
    "CtkktError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "VariableRangeError",
    "ExprDomainError",
    "ProblemFormatError",
    "DimensionError",
    "CQFailure",
    "InactiveConstraintError",
    "InfeasibleError",
    "AsymmetricMatrixError",
    "SolverError",
]
