"""Error taxonomy shared across the pipeline.

Every error carries a machine-parseable class name and the process exit
code the CLI maps it to (0 ok, 2 config, 3 input, 4 invariant, 5 I/O).
"""


class LogiprepError(Exception):
    error_class = "error"
    exit_code = 1


class ConfigError(LogiprepError):
    error_class = "config-error"
    exit_code = 2


class InputError(LogiprepError):
    error_class = "input-error"
    exit_code = 3


class InvariantViolation(LogiprepError):
    error_class = "invariant-violation"
    exit_code = 4


class StorageError(LogiprepError):
    error_class = "io-error"
    exit_code = 5
