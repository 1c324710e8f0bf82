"""Exception hierarchy shared across the package."""


class KcsError(Exception):
    """Base class for all errors raised by :mod:`kcs`."""


class TopologyError(KcsError, ValueError):
    """Skeleton edges are out of range, self-loops, or do not form a tree."""


class DimensionError(KcsError, ValueError):
    """Array shapes do not agree."""


class ParameterError(KcsError, ValueError):
    """A numeric parameter is out of its admissible range."""


class DegenerateInputError(KcsError, ValueError):
    """Input carries no usable information (e.g. an all-zero matrix)."""


class DegenerateGeometryError(KcsError):
    """Bone geometry cannot determine a camera (e.g. all bones collinear)."""

    def __init__(self, message, frame=None):
        if frame is not None:
            message = f"frame {frame}: {message}"
        super().__init__(message)
        self.frame = frame


class DivergenceError(KcsError):
    """An iterative solver produced a non-finite objective."""


class FormatError(KcsError, ValueError):
    """A data file could not be parsed.

    The message always carries ``path:line`` when a line is known.
    """

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = str(path)
            if line is not None:
                loc += f":{line}"
            loc += ": "
        super().__init__(loc + message)
        self.path = path
        self.line = line
