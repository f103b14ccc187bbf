# app/errors.py
from typing import Any, Optional


class SwarmDiffError(Exception):
    """
    Base error for the toolkit.

    Carries a human-readable detail plus the process exit code used by the
    command line.
    """

    exit_code: int = 1

    def __init__(self, detail: str, *, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


# Exit-code families
class UsageError(SwarmDiffError):
    exit_code = 1


class ConfigError(SwarmDiffError):
    """Invalid configuration; carries every violation at once."""

    exit_code = 1

    def __init__(self, detail: str, errors: Optional[list[dict[str, Any]]] = None):
        super().__init__(detail)
        self.errors = errors or []


class PlanningError(SwarmDiffError):
    exit_code = 2


class ArtifactError(SwarmDiffError):
    """I/O or format problem with a file artifact."""

    exit_code = 3

    def __init__(self, detail: str, *, path: Optional[str] = None, offset: Optional[int] = None):
        if offset is not None:
            detail = f"{detail} (byte offset {offset})"
        super().__init__(detail)
        self.path = path
        self.offset = offset


# Domain errors
class DomainError(SwarmDiffError, ValueError):
    """A query outside the domain of a field or grid."""


class NumericDomainError(SwarmDiffError, ValueError):
    def __init__(self, detail: str, smallest_eigenvalue: Optional[float] = None):
        if smallest_eigenvalue is not None:
            detail = f"{detail} (smallest eigenvalue {smallest_eigenvalue:.3e})"
        super().__init__(detail)
        self.smallest_eigenvalue = smallest_eigenvalue


class ConditioningError(NumericDomainError):
    pass


class ScenarioGenerationError(SwarmDiffError):
    exit_code = 2


class SamplingError(PlanningError):
    pass


class NoPathError(PlanningError):
    pass


class DatasetGenerationError(SwarmDiffError):
    exit_code = 2


class TransportError(PlanningError):
    pass


class InfeasibleEndpointError(PlanningError):
    pass


class DenoiserDivergenceError(SwarmDiffError):
    exit_code = 2

    def __init__(self, layer_index: int, where: str = "block"):
        super().__init__(f"non-finite activations in denoiser {where} {layer_index}")
        self.layer_index = layer_index


class TrainingDivergedError(SwarmDiffError):
    """Raised on a non-finite loss; keeps the last finite parameters."""

    exit_code = 2

    def __init__(
        self, step: int, last_good_state: Optional[dict] = None, last_good_step: int = 0, prior: Any = None
    ):
        super().__init__(f"training loss became non-finite at step {step}; last good step {last_good_step}")
        self.step = step
        self.last_good_state = last_good_state
        self.last_good_step = last_good_step
        # DiffusionPrior rebuilt from the last good parameters
        self.prior = prior
