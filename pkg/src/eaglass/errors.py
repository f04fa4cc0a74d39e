"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration and validation
problems exit 1, broken internal invariants exit 2.
"""


class ConfigurationError(ValueError):
    """A run configuration is inconsistent or out of the supported range."""


class ContractViolationError(ValueError):
    """An input violates a documented precondition."""


class SizeLimitError(ValueError):
    """An enumeration or table would exceed its hard cap."""


class NonContractibleCycleError(ValueError):
    """A dual cycle winds around the torus and bounds no finite region."""


class BoundedRunError(RuntimeError):
    """A bounded iterative run hit its cap before finishing.

    Carries whatever partial state was produced so callers can inspect
    or retry with a larger budget.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
