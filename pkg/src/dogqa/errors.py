"""Exception hierarchy shared across the package.

Errors that can sink a single question during evaluation carry a
``failure_tag`` hint (a string matching ``evalkit.FailureTag`` values) so the
harness can bucket them without inspecting types.
"""


class DogError(Exception):
    failure_tag = "other"


class KbLoadError(DogError):
    """Raised when a knowledge-base file cannot be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class EntityNotFoundError(DogError):
    pass


class DeadEndError(DogError):
    """No outgoing or incoming relations at the current topic entity."""

    failure_tag = "relation_filtering"


class SparqlError(DogError):
    pass


class SparqlNetworkError(SparqlError):
    """Transport-level failure talking to the endpoint; safe to retry."""

    retriable = True

    def __init__(self, message, endpoint=None, status=None):
        if endpoint:
            message = f"{message} [endpoint: {endpoint}]"
        super().__init__(message)
        self.endpoint = endpoint
        self.status = status


class SparqlProtocolError(SparqlError):
    """Endpoint replied but not with valid sparql-results+json."""


class SparqlTimeoutError(SparqlError):
    retriable = True


class ProviderError(DogError):
    """Completion backend failed after exhausting its retry budget."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class UnmatchedRequestError(ProviderError):
    """A scripted provider saw a request no rule matches; a test bug signal."""


class ParseError(DogError):
    pass


class RelationParseError(ParseError):
    failure_tag = "relation_filtering"


class DecisionParseError(ParseError):
    failure_tag = "iteration_stopping"


class SimplifyParseError(ParseError):
    failure_tag = "question_simplifying"


class SimplificationFailedError(DogError):
    """The debate ended with the question unchanged."""

    failure_tag = "question_simplifying"


class PromptError(DogError):
    pass


class DatasetError(DogError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class ConfigError(DogError):
    pass
