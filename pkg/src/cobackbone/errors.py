"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CobackboneError(Exception):
    exit_code = 1


class ConfigError(CobackboneError, ValueError):
    exit_code = 2


class InputError(CobackboneError):
    exit_code = 3


class ParseError(InputError, ValueError):
    """Raised in strict mode when the input contains malformed lines."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class ResourceError(CobackboneError):
    exit_code = 4
