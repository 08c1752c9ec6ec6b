"""Exception hierarchy shared by all modules."""


class TriBenchError(Exception):
    """Base class for every error raised by this package."""


class DegenerateError(TriBenchError, ValueError):
    """Geometry that admits no unique answer (CLI exit code 3)."""


class CheiralityViolation(DegenerateError):
    pass


class DegenerateGeometry(DegenerateError):
    pass


class EpipoleAtPoint(DegenerateError):
    pass


class DegenerateConfiguration(DegenerateError):
    pass


class AmbiguousCheirality(DegenerateError):
    pass


class DisconnectedGraph(DegenerateError):
    pass


class CollinearDegeneracy(DegenerateError):
    pass


class DegenerateAngle(DegenerateError):
    pass


class EmptyInput(TriBenchError, ValueError):
    pass


class InputFormatError(TriBenchError, ValueError):
    """Malformed camera / correspondence / point file (CLI exit code 2)."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
