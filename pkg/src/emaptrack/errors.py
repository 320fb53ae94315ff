"""Exception hierarchy shared by all emaptrack modules."""


class EmapError(Exception):
    """Base class for every error raised by emaptrack."""


class DegenerateProjectionError(EmapError, ValueError):
    """A projection denominator fell below the degeneracy threshold."""


class NonFiniteStateError(EmapError, FloatingPointError):
    pass


class SingularInnovationError(EmapError, ArithmeticError):
    pass


class MissingDepthError(EmapError, ValueError):
    pass


class OutOfOrderFrameError(EmapError, ValueError):
    pass


class InputError(EmapError):
    """Bad user input: unreadable file, malformed line, invalid manifest."""


class ParseError(InputError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
