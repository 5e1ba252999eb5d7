# thinphase Custom Exceptions


class ThinPhaseError(Exception):
    """Base error class for thinphase

    Args:
        message (str): specific error message
        status (int): process exit status reported by the command line tool
        root_exception (Exception): Exception instance of root exception
    """
    def __init__(self, message, status, root_exception=None):
        self.message = message
        self.status = status
        self.root_exception = root_exception

    def __str__(self):
        if self.root_exception is not None:
            return "{0.message}. Root exception: {0.root_exception}".format(self)
        else:
            return "{0.message}.".format(self)


class ConfigurationError(ThinPhaseError):
    """Scenario or command line configuration is invalid"""
    def __init__(self, message, status=2, root_exception=None):
        super(ConfigurationError, self).__init__(message, status, root_exception)


class GridError(ThinPhaseError):
    """Inconsistent grid specification, or a region leaving the grid"""
    def __init__(self, message, status=2, root_exception=None):
        super(GridError, self).__init__(message, status, root_exception)


class FileFormatError(ThinPhaseError):
    """A THINPH1 file could not be decoded"""
    def __init__(self, message, status=2, root_exception=None):
        super(FileFormatError, self).__init__(message, status, root_exception)


class ConvergenceError(ThinPhaseError):
    """An iterative solve stopped before reaching its tolerance"""
    def __init__(self, message, status=3, root_exception=None, residual=None):
        super(ConvergenceError, self).__init__(message, status, root_exception)
        self.residual = residual


class DiagnosticsError(ThinPhaseError):
    """Preconditions of a diagnostic are not met"""
    def __init__(self, message, status=2, root_exception=None):
        super(DiagnosticsError, self).__init__(message, status, root_exception)


class ValidationFailure(ThinPhaseError):
    """One or more acceptance criteria failed"""
    def __init__(self, message, status=1, root_exception=None, results=None):
        super(ValidationFailure, self).__init__(message, status, root_exception)
        self.results = results
