"""Exception hierarchy; the CLI maps each class to an exit code."""


class GCausalError(Exception):
    exit_code = 1


class ConfigError(GCausalError, ValueError):
    exit_code = 2


class DataError(GCausalError, ValueError):
    exit_code = 3


class NumericError(GCausalError, ArithmeticError):
    exit_code = 4
