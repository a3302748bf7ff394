from typing import Dict, Any, Optional


class SimulatorError(Exception):
    """
    Base exception for simulator errors
    """
    def __init__(
        self,
        message: str = "An error occurred",
        details: Optional[Dict[str, Any]] = None,
        exit_code: int = 1
    ):
        self.message = message
        self.details = details or {}
        self.exit_code = exit_code
        super().__init__(self.message)

    def __str__(self) -> str:
        if not self.details:
            return self.message
        extras = ", ".join(f"{key}={value}" for key, value in self.details.items())
        return f"{self.message} ({extras})"


class DimensionError(SimulatorError):
    """
    Exception for operands whose dimensions do not fit together
    """
    def __init__(
        self,
        message: str = "Dimension mismatch",
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message=message, details=details)


class NonHermitianError(SimulatorError):
    """
    Exception for matrices that should be Hermitian but are not
    """
    def __init__(
        self,
        message: str = "Matrix is not Hermitian within tolerance",
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message=message, details=details)


class NonUnitaryError(SimulatorError):
    """
    Exception for operators (or bases) that should be unitary but are not
    """
    def __init__(
        self,
        message: str = "Operator is not unitary within tolerance",
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message=message, details=details)


class InvalidStateError(SimulatorError):
    """
    Exception for density matrices failing validation
    """
    def __init__(
        self,
        message: str = "Invalid density matrix",
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message=message, details=details)


class ParameterRegimeError(SimulatorError):
    """
    Exception for physical parameters outside the modelled regime
    """
    def __init__(
        self,
        message: str = "Parameters outside the modelled regime",
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message=message, details=details)


class SolverConvergenceError(SimulatorError):
    """
    Exception for root solves that do not reach the residual target
    """
    def __init__(
        self,
        message: str = "Solver did not converge",
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message=message, details=details)


class SchemeMismatchError(SimulatorError):
    """
    Exception for trajectory objects that were built for different schemes
    """
    def __init__(
        self,
        message: str = "Trajectory scheme mismatch",
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message=message, details=details)


class ConfigurationError(SimulatorError):
    """
    Exception for invalid run configurations
    """
    def __init__(
        self,
        message: str = "Invalid configuration",
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message=message, details=details, exit_code=1)


class CheckFailedError(SimulatorError):
    """
    Exception raised when an identity or inequality check exceeds its tolerance
    """
    def __init__(
        self,
        message: str = "Verification check failed",
        details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message=message, details=details, exit_code=2)
