"""Exception types shared by every pipeline
"""


class InfolabError(Exception):
    pass


class InputError(InfolabError, ValueError):
    """The inputs or the configuration are invalid. The CLI exits with status 1."""


class NumericalError(InfolabError, ArithmeticError):
    """A computation cannot proceed on well-formed inputs. The CLI exits with status 2."""
