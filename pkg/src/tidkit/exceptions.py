"""Exception hierarchy.

The CLI maps these onto exit codes: :class:`InvalidNetworkError` -> 1,
inference/estimation errors -> 2, :class:`ConfigError` -> 3.
"""


class TidkitError(Exception):
    """Base class for all errors raised by tidkit."""


class InvalidNetworkError(TidkitError):
    """A network failed structural validation.

    The offending violations are kept on ``violations``.
    """

    def __init__(self, violations, message=None):
        self.violations = list(violations)
        if message is None:
            head = "; ".join(str(v) for v in self.violations[:5])
            more = len(self.violations) - 5
            message = f"invalid network: {head}" + (f" (+{more} more)" if more > 0 else "")
        super().__init__(message)


class MissingVariableError(TidkitError, KeyError):
    """An assignment or case does not mention a variable that is required."""

    def __str__(self):
        return Exception.__str__(self)


class UnknownVariableError(TidkitError, KeyError):
    """A variable id or state label is not part of the network."""

    def __str__(self):
        return Exception.__str__(self)


class InferenceError(TidkitError):
    """Base class for inference failures."""


class InconsistentEvidenceError(InferenceError):
    """The evidence has probability zero under the model."""


class OracleSizeError(InferenceError):
    """The brute-force oracle refused a problem above its size guard."""


class EstimationError(TidkitError):
    """Parameter estimation or scoring could not be carried out."""


class DegenerateReferenceError(EstimationError):
    """The reference model's risk is zero, so a risk ratio is undefined."""


class ConfigError(TidkitError):
    """An experiment configuration or file could not be interpreted."""
