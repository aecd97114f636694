"""Exception hierarchy shared by all stages."""


class RadOptError(Exception):
    """Base class for toolkit errors."""


class DomainError(RadOptError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ContractError(RadOptError, ValueError):
    """Arguments are individually valid but mutually incompatible."""


class InstanceError(RadOptError, ValueError):
    """A constructed problem instance is empty or malformed."""


class DegeneratePatternError(RadOptError):
    """The array radiates nothing (all elements dead or zero drive)."""


class ResolutionError(RadOptError):
    """The evaluation raster is too coarse or too small for the query."""


class DivergenceError(RadOptError):
    """The optimizer produced only non-finite objective values."""


class NumericError(RadOptError):
    """A numerical routine failed to terminate cleanly."""


class InfeasibleCoverError(RadOptError):
    """Some grid cells cannot be covered by any candidate dwell."""

    def __init__(self, uncovered, message=None):
        self.uncovered = tuple(sorted(uncovered))
        super().__init__(message or f"{len(self.uncovered)} cell(s) uncovered: {list(self.uncovered)}")


class WaveformInfeasibleError(RadOptError):
    """No catalog waveform satisfies the requirement; carries the report."""

    def __init__(self, report):
        self.report = report
        super().__init__(report.text())


class PipelineError(RadOptError):
    """A pipeline stage failed; names the stage and the binding constraint."""

    def __init__(self, stage, constraint, detail="", uncovered=()):
        self.stage = stage
        self.constraint = constraint
        self.detail = detail
        self.uncovered = tuple(uncovered)
        msg = f"stage '{stage}' failed: {constraint}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
