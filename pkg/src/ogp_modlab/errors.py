"""Exception hierarchy shared by every module."""


class ModlabError(Exception):
    pass


class ParameterError(ModlabError, ValueError):
    """Rejected model or operation parameters."""


class DegenerateGraphError(ModlabError):
    """The instance has no edges, so modularity is undefined."""


class UndefinedModularityError(ModlabError):
    pass


class GraphFormatError(ModlabError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyFeasibleError(ModlabError):
    """A brute-force grid slice contains no feasible matrix."""


class InvariantError(ModlabError, AssertionError):
    """A postcondition that must always hold was violated at runtime."""
