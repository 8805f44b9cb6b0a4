"""Exception types raised across the toolkit."""


class BionerError(Exception):
    """Base class for all toolkit errors."""


class NoTokenOverlap(BionerError):
    pass


class ParseError(BionerError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class SchemaNotFound(BionerError):
    def __init__(self, dataset):
        super().__init__(f"no schema for dataset {dataset!r}")
        self.dataset = dataset


class ValidationError(BionerError):
    def __init__(self, line, violations):
        detail = "; ".join(str(v) for v in violations)
        super().__init__(f"line {line}: {detail}")
        self.line = line
        self.violations = list(violations)


class OverlapUnserializable(BionerError):
    """Two spans cross (overlap without containment) and cannot be bracketed."""

    def __init__(self, first, second):
        super().__init__(f"crossing spans cannot be serialized: {first} / {second}")
        self.pair = (first, second)


class AlignmentRejected(BionerError):
    def __init__(self, ratio, threshold):
        super().__init__(f"edit ratio {ratio:.3f} exceeds {threshold}")
        self.ratio = ratio
        self.threshold = threshold


class MissingPlaceholder(BionerError):
    pass


class BackendError(BionerError):
    """A generation or scoring backend failed.

    ``kind`` is one of ``transport``, ``timeout``, ``http_status``,
    ``malformed_response`` or ``unknown_sentence`` (free-form for mocks).
    """

    def __init__(self, kind, detail=""):
        super().__init__(f"{kind}: {detail}" if detail else kind)
        self.kind = kind
        self.detail = detail

    def __eq__(self, other):
        return (
            isinstance(other, BackendError)
            and self.kind == other.kind
            and self.detail == other.detail
        )

    def __hash__(self):
        return hash((self.kind, self.detail))


class UnknownSentence(BackendError):
    def __init__(self, detail=""):
        super().__init__("unknown_sentence", detail)


class DuplicateEntity(BionerError):
    pass


class MarkerCollision(BionerError):
    pass


class InsufficientNegatives(BionerError):
    pass
