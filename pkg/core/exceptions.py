"""
Error classes shared by every sessrec app.

Each class carries the process exit code a management command reports when
the error escapes a command: 2 bad flags, 3 I/O, 4 format or shape
mismatch, 5 numerical failure.
"""


class SessrecError(Exception):
    exit_code = 1


class FlagError(SessrecError):
    exit_code = 2


class StorageError(SessrecError):
    exit_code = 3


class FormatError(SessrecError):
    exit_code = 4


class ShapeError(FormatError):
    pass


class EmptyCorpusError(FormatError):
    pass


class NumericalError(SessrecError):
    exit_code = 5
