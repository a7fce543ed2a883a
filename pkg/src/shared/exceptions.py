"""
Custom Exceptions Module
Define custom exceptions for the Muskat simulator and verification suite
"""
from typing import Any, Optional


class MuskatError(Exception):
    """Base exception for simulator errors"""
    pass


class ConfigurationError(MuskatError):
    """Raised when a run configuration is missing, malformed or inconsistent"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnstableConfigurationError(ConfigurationError):
    """Raised when the densities describe the ill-posed unstable case (rho2 <= rho1)"""
    pass


class InvalidParameterError(MuskatError, ValueError):
    """Raised when a numerical parameter is outside its admissible range"""
    pass


class SpectralContractError(MuskatError):
    """Raised when Fourier coefficients violate Hermitian symmetry"""
    pass


class QuadratureConvergenceError(MuskatError):
    """Raised when an alpha-quadrature does not converge under node doubling"""
    pass


class SeriesDivergenceError(MuskatError, ValueError):
    """Raised when a power series is evaluated outside its disc of convergence"""
    pass


class SimulationAbortedError(MuskatError):
    """Raised when a time integration has to stop before t_final"""

    def __init__(self, message: str, state: Any = None, t: float = 0.0, trajectory: Any = None):
        super().__init__(message)
        self.state = state
        self.t = t
        self.trajectory = trajectory


class SlopeBoundViolationError(SimulationAbortedError):
    """Raised when a run declared slope-subcritical reaches slope 1"""
    pass


class ConstantsMismatchError(MuskatError):
    """Raised when a reproduced constant misses its reference value"""
    pass


class OutputError(MuskatError):
    """Raised when run outputs cannot be written or read"""
    pass
