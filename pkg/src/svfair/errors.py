"""Exception types raised across the toolkit."""

from __future__ import annotations


class SVFairError(Exception):
    """Base class for every input or contract error the toolkit raises."""


class ParseError(SVFairError, ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        self.bare_message = message
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class GroupingError(SVFairError, ValueError):
    pass


class DegeneratePopulationError(SVFairError, ValueError):
    pass


class UndefinedRatioError(SVFairError, ZeroDivisionError):
    pass


class SubgroupMismatchError(SVFairError, ValueError):
    def __init__(self, only_a, only_b):
        self.only_a = sorted(only_a)
        self.only_b = sorted(only_b)
        super().__init__(
            "subgroup sets differ: only in A: "
            f"{', '.join(self.only_a) or '-'}; only in B: {', '.join(self.only_b) or '-'}"
        )


class SchemaError(SVFairError, ValueError):
    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{message}: {field}" if field else message)
