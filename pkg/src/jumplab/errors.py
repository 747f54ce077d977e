"""Exception hierarchy with machine-readable error codes.

Every error carries a ``code`` string that the CLI emits in its JSON error
output, so scripts can dispatch on failures without parsing messages.
"""


class JumplabError(Exception):
    """Base class for all jumplab errors."""

    code = "error"


class DimensionMismatchError(JumplabError):
    code = "dimension_mismatch"


class NonHermitianError(JumplabError):
    code = "non_hermitian_h"


class DegenerateSpectrumError(JumplabError):
    """Two measurement eigenvalues closer than the distinctness tolerance."""

    code = "degenerate_spectrum"


class NonDiagonalFastTermError(JumplabError):
    """A full matrix was supplied where only a diagonal is admissible."""

    code = "non_diagonal_fast_term"


class VanishingDeltaError(JumplabError):
    """A phase-damping denominator has no positive real part on an active pair."""

    code = "vanishing_delta"


class NegativeRateError(JumplabError):
    code = "negative_rate"


class ReducibleError(JumplabError):
    """The generator admits more than one stationary distribution."""

    code = "reducible"


class StabilityGuardError(JumplabError):
    """Step size violates dt * gamma^2 <= 0.05."""

    code = "stability_guard"


class PositivityBreachError(JumplabError):
    """State dropped below the positivity monitor threshold; dt too large."""

    code = "positivity_breach"


class NoCollapseError(JumplabError):
    code = "no_collapse"


class EmptyEnsembleError(JumplabError):
    code = "empty_ensemble"


class InsufficientSamplesError(JumplabError):
    code = "insufficient_samples"


class ConfigError(JumplabError):
    """Malformed experiment configuration or CLI usage."""

    code = "config"
