"""Exception hierarchy for the trainer."""


class TrainerError(Exception):
    """Base class for all trainer failures."""


class ConfigError(TrainerError):
    """Bad hyperparameters or command-line usage."""


class DataError(TrainerError):
    """Dataset file violates the line-delimited record contract."""


class TrainError(TrainerError):
    """Training diverged or could not finish."""
