class ExemplarDialogError(Exception):
    exit_code = 1


class ConfigError(ExemplarDialogError):
    """Bad command line, configuration file or stage ordering."""

    exit_code = 2


class DataError(ExemplarDialogError):
    """Input data is missing, unreadable or malformed."""

    exit_code = 3


class NumericalError(ExemplarDialogError):
    """A NaN or Inf showed up in a loss or gradient."""

    exit_code = 4
