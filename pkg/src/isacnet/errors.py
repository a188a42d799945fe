"""Exception hierarchy shared by all isacnet modules."""


class IsacError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidConfigError(IsacError, ValueError):
    """A configuration value violates a constraint."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class DegenerateGeometryError(IsacError, ValueError):
    """Two positions coincide where a direction or distance is needed."""


class OutOfBoundsError(IsacError, ValueError):
    """A position lies outside the service area."""


class PilotContaminationError(IsacError, ValueError):
    """Fewer orthogonal pilots than UEs."""


class DegenerateChannelError(IsacError, ValueError):
    """A precoder normalization would divide by zero."""


class UndefinedTestError(IsacError, ValueError):
    """The detector or SNR is undefined (all-zero response, zero rank)."""


class TrialError(IsacError):
    """Wraps a domain error with the Monte-Carlo trial that raised it."""

    def __init__(self, trial_index, sweep_id, cause):
        self.trial_index = trial_index
        self.sweep_id = sweep_id
        self.cause = cause
        super().__init__(f"trial {trial_index} (sweep {sweep_id}): {cause}")
