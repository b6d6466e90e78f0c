"""Exception hierarchy shared by all subseg modules.

Every validation failure raised by the library derives from
:class:`SubsegError`, which the command line maps to exit status 1.
"""


class SubsegError(ValueError):
    """Base class for validation errors raised by subseg."""


class LengthMismatch(SubsegError):
    pass


class EmptyCorpus(SubsegError):
    pass
