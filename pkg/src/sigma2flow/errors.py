"""Exception types shared across the package."""


class Sigma2FlowError(Exception):
    """Base class for all package errors."""


class DegenerateCone(Sigma2FlowError, ValueError):
    """Raised when a pointwise quantity needs sigma_1(W) > 0 and it fails."""


class NotInCone(Sigma2FlowError, ValueError):
    """Raised when a metric leaves C_1 (sigma_1 <= 0 at some node)."""


class NotAdmissible(NotInCone):
    """Raised when a metric is in C_1 but not in the perturbed set C_{1,eps}."""


class ConeExit(Sigma2FlowError):
    """A trial step drove min sigma_1(W) below the configured floor."""


class RetryExhausted(ConeExit):
    """Step rejected too many times in a row."""


class FlowOverflow(Sigma2FlowError, FloatingPointError):
    """Non-finite values appeared during integration."""


class ParseError(Sigma2FlowError, ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ValidationError(Sigma2FlowError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class RejectionExhausted(Sigma2FlowError):
    """The metric sampler could not find a C_1 sample."""
