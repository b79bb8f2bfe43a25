"""Exception hierarchy shared by all edusort modules."""


class EduSortError(Exception):
    """Base class; the CLI maps it to exit code 2."""


class EmptySample(EduSortError):
    pass


class SchemaViolation(EduSortError):
    def __init__(self, record_id, message="education code outside schema"):
        self.record_id = record_id
        super().__init__(f"record {record_id!r}: {message}")


class ShapeMismatch(EduSortError):
    pass


# table files use the same condition
ShapeError = ShapeMismatch


class UndefinedDiagonal(EduSortError):
    def __init__(self, group):
        self.group = group
        super().__init__(
            f"diagonal interest factor undefined for group {group} "
            "but its weight is nonzero"
        )


class InvalidTargets(EduSortError):
    pass


class NotConverged(EduSortError):
    """Solver hit its iteration cap; ``result`` holds the best iterate."""

    def __init__(self, result, message=None):
        self.result = result
        self.residual = result.max_marginal_residual
        super().__init__(
            message
            or f"no convergence after {result.iterations} iterations "
            f"(marginal residual {self.residual:.3e})"
        )


class IpfSupportError(EduSortError):
    pass


class ZeroCellError(EduSortError):
    def __init__(self, i, j, message=None):
        self.i = i
        self.j = j
        super().__init__(
            message or f"cell ({i}, {j}) is empty but must receive positive mass"
        )


class ParseError(EduSortError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NotNormalized(EduSortError):
    pass


class NegativeCell(EduSortError):
    pass
