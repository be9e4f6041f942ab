# SPDX-License-Identifier: MIT

# All errors raised by kerncoint derive from GenericError so that the CLI can
# report them uniformly. InvalidArgumentError doubles as a ValueError since it
# is raised for precondition violations of the numerical routines.


class GenericError(Exception):
    pass


class InvalidArgumentError(GenericError, ValueError):
    pass


class InternalError(GenericError):
    pass


class NotEnoughDataError(GenericError):
    pass


class FitFailedError(GenericError):
    pass


class FitUndefinedError(GenericError):
    pass


class ConfigRejectedError(GenericError):
    def __init__(self, assumption, detail):
        super().__init__("Configuration rejected: {} ({})".format(assumption, detail))
        self.assumption = assumption
        self.detail = detail
