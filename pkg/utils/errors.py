# utils/errors.py


class FaidLabError(ValueError):
    """Base class for every input/configuration problem raised by the library."""


class AlistParseError(FaidLabError):
    """Malformed alist text. `line` is 1-based and refers to the original text."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RuleFileError(FaidLabError):
    pass


class ScheduleError(FaidLabError):
    pass


class ConfigError(FaidLabError):
    pass


class EnumerationCeilingError(FaidLabError):
    pass


class UsageError(FaidLabError):
    """Bad CLI/API usage. `flag` names the offending option when there is one."""

    def __init__(self, message: str, flag: str | None = None):
        self.flag = flag
        if flag:
            message = f"{flag}: {message}"
        super().__init__(message)
