"""Shared exception types for the pipeline."""


class PipelineError(Exception):
    """Base class for pipeline-level failures."""


class EmptyCorpusError(PipelineError):
    """A corpus source yielded zero well-formed article records."""


class ConsistencyError(PipelineError):
    """Cross-file references do not line up (e.g. dangling article id)."""


class GatewayError(PipelineError):
    """Base class for model-backend failures."""


class AuthError(GatewayError):
    """Authentication/authorization failure. Never retried."""


class TransientBackendError(GatewayError):
    """Retryable failure: rate limit, timeout, or 5xx."""


class ProtocolError(GatewayError):
    """Backend reply did not match the expected wire shape."""


class UnknownJobError(GatewayError):
    """Fine-tune job id is not known to the backend."""


class EmptyOutputError(GatewayError):
    """Model returned empty text after the allowed retry."""
