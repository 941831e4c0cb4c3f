"""Exception types shared across the package."""
from __future__ import annotations


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class NoAdmissibleVolumes(ValidationError):
    def __init__(self, rejected: list[tuple[str, list[str]]]):
        self.rejected = rejected
        detail = "; ".join(f"{sid}: {', '.join(reasons)}" for sid, reasons in rejected)
        super().__init__(f"no admissible volumes ({detail})" if detail else "no admissible volumes")


class TemplateIntegrityError(RuntimeError):
    """A prompt template fixture does not match its recorded digest."""


class TransportError(RuntimeError):
    """The endpoint could not be reached after all retries."""


class EndpointError(RuntimeError):
    """The endpoint answered with a non-2xx status."""

    def __init__(self, status: int, body: str):
        self.status = status
        self.body_excerpt = body[:500]
        super().__init__(f"endpoint returned HTTP {status}: {self.body_excerpt}")
