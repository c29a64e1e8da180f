"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class WhimpError(Exception):
    exit_code = 1


class ValidationError(WhimpError, ValueError):
    exit_code = 2


class ParseError(ValidationError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class IngestError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class ConfigError(ValidationError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(self.problems))


class ConsistencyError(WhimpError, RuntimeError):
    exit_code = 4
