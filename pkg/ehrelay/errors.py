"""
Exceptions raised by ehrelay.

Every error carries the exit status the command line terminates with.
"""


class RelayError(Exception):
    def __init__(self, message, exit_code=1):
        super().__init__(message)
        self.exit_code = exit_code


class ConfigError(RelayError):
    """ invalid configuration, unknown names, unparseable config files """
    def __init__(self, message, line=None):
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message, exit_code=2)
        self.line = line


class DomainError(RelayError, ValueError):
    """ argument outside the mathematical domain of a function """
    def __init__(self, message):
        super().__init__(message, exit_code=2)


class AnalyticError(RelayError):
    """ closed form requested outside the regime it was derived for """
    def __init__(self, message):
        super().__init__(message, exit_code=2)


class QuadratureError(RelayError):
    def __init__(self, message, error_estimate):
        super().__init__(f'{message} (achieved error estimate {error_estimate:.3e})', exit_code=4)
        self.error_estimate = error_estimate


class ConvergenceError(RelayError):
    def __init__(self, message, failures):
        super().__init__(message, exit_code=3)
        self.failures = failures
