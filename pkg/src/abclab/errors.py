"""Exception hierarchy shared by all modules.

The CLI maps these onto its exit-code contract: configuration and violated
structural hypotheses exit 2, numerical certification failures exit 1,
physics-invariant violations exit 3, I/O problems exit 4.
"""


class AbclabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(AbclabError):
    """Invalid build parameters, scenario document, or CLI usage."""


class DimensionError(AbclabError):
    """Mismatched field/matrix dimensions."""


class ModelError(AbclabError):
    """Coefficient data violating a model requirement (e.g. inf m <= 0)."""


class AssumptionError(AbclabError):
    """A structural assumption of the operator setup failed.

    ``tag`` names the violated assumption ("A3", "A7", "A8", ...).
    """

    def __init__(self, tag: str, message: str):
        self.tag = tag
        super().__init__(f"[{tag}] {message}")


class SpectralParameterError(AbclabError):
    """Spectral parameter refused.

    ``reason`` distinguishes which admissibility test failed:
    "near-sigma-a0", "near-zero" or "pencil-singular".
    """

    def __init__(self, reason: str, message: str):
        self.reason = reason
        super().__init__(message)


class NumericalError(AbclabError):
    """Solver or certification failure (ill-conditioning, non-convergence)."""


class PhysicsError(AbclabError):
    """A physical invariant (energy law) measurably violated."""
