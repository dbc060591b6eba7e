"""
Exceptions raised by the toolkit. Messages are prefixed with the name of
the module that raised them so CLI output stays attributable.
"""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class CVRCError(Exception):
    exit_code = EXIT_NUMERIC

    def __init__(self, module, message):
        self.module = module
        super().__init__('{}: {}'.format(module, message))


class InvalidInputError(CVRCError, ValueError):
    pass


class SceneError(InvalidInputError):
    pass


class ConfigError(InvalidInputError):
    exit_code = EXIT_USAGE


class FormatError(CVRCError):
    exit_code = EXIT_IO


class SolverError(CVRCError):
    """The Hermitian factorization broke down at `step` (1-based minor order)."""

    def __init__(self, module, message, step=None):
        self.step = step
        super().__init__(module, message)


class ConvergenceError(CVRCError):
    """Power iteration did not settle; `estimate` is the last iterate."""

    def __init__(self, module, message, estimate=None):
        self.estimate = estimate
        super().__init__(module, message)
