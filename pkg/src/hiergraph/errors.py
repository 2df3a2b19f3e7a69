"""Exception types. Each maps to one CLI exit code."""


class HierGraphError(Exception):
    exit_code = 4


class ConfigError(HierGraphError, ValueError):
    exit_code = 2


class DataError(HierGraphError, ValueError):
    exit_code = 3


class GraphFormatError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
