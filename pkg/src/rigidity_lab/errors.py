"""Exception hierarchy shared by every module of the lab."""


class LabError(Exception):
    """Base class for all domain errors raised by rigidity_lab."""


class GroupError(LabError):
    pass


class IncompatibleDensities(LabError):
    def __init__(self, msg: str = "incompatible densities"):
        super().__init__(msg)


class DimensionMismatch(LabError):
    pass


class NoContraction(LabError):
    """Averaging failed to shrink displacement."""


class DomainViolation(LabError):
    """A partial action was asked to act outside its admissible domain."""

    def __init__(self, msg: str, step: int | None = None):
        super().__init__(msg if step is None else f"{msg} (step {step})")
        self.step = step


class ResolutionError(LabError):
    pass


class PipelineError(LabError):
    pass


class BootstrapStalled(PipelineError):
    def __init__(self, round_index: int, detail: str = ""):
        msg = f"bootstrap stalled at round {round_index}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.round_index = round_index


class ConfigError(LabError):
    """Invalid experiment configuration (CLI exit code 2)."""
