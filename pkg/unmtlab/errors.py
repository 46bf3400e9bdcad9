# unmtlab/errors.py


class UnmtlabError(Exception):
    """Base class for every error raised by unmtlab."""


class SpecValidationError(UnmtlabError, ValueError):
    """An argument or config field is outside its allowed range."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class OutOfVocabularyError(UnmtlabError, KeyError):
    """A token is not in the source-side vocabulary."""

    def __init__(self, token, direction=None):
        self.token = token
        self.direction = direction
        super().__init__(token)

    def __str__(self):
        where = f" for direction {self.direction}" if self.direction else ""
        return f"out-of-vocabulary token {self.token!r}{where}"


class CapacityError(UnmtlabError, ValueError):
    """The grammar cannot produce the requested corpus sizes."""


class NumericError(UnmtlabError, FloatingPointError):
    """NaN or Inf detected in a loss, gradient or parameter."""

    def __init__(self, parameter, message="non-finite values"):
        self.parameter = parameter
        super().__init__(f"{message} in {parameter!r}")


class ShapeMismatchError(UnmtlabError, ValueError):
    def __init__(self, parameter, expected, got):
        self.parameter = parameter
        super().__init__(f"shape mismatch for {parameter!r}: expected {expected}, got {got}")


class BatchBudgetError(UnmtlabError, ValueError):
    """A single sentence does not fit in the token budget of a batch."""

    def __init__(self, index, length, budget):
        self.index = index
        super().__init__(f"sentence {index} has {length} tokens, over the batch budget of {budget}")
