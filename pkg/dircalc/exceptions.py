"""Exceptions raised by DirCalc."""


class ValidationError(Exception):
    """An exception thrown when input data or parameters are invalid.

    Parameters
    ----------
    msg : str
        Description of the offending input.
    """

    def __init__(self, msg):
        super().__init__("Invalid input. {0}".format(msg))


class NumericalError(Exception):
    """An exception thrown when a numerical computation fails its own accuracy checks.

    Parameters
    ----------
    msg : str
        Description of the failure.

    residual : float, optional
        Residual norm measured when the failure was detected.
    """

    def __init__(self, msg, residual=None):
        self.residual = residual
        if residual is not None:
            msg = "{0} Residual: {1:.6e}.".format(msg, residual)
        super().__init__("Numerical failure. {0}".format(msg))
