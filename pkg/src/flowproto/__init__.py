"""flowproto: invertible-flow hybrid model for semi-supervised few-shot classification.

A normalizing flow over d-dimensional vectors is trained jointly as a
generative density model and as the embedding of a latent-space prototypical
classifier, weighted by a composite objective. The package ships the numeric
core, episodic training, synthetic data scenarios, and a CLI harness.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    ContractViolation,
    FlowProtoError,
    NumericError,
    ParseError,
    VersionError,
)

__all__ = [
    "ConfigurationError",
    "ContractViolation",
    "FlowProtoError",
    "NumericError",
    "ParseError",
    "VersionError",
    "__version__",
]
