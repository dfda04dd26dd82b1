"""Errors shared across pipeline modules."""


class InvalidArgument(ValueError):
    pass
