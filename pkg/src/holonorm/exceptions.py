"""Exception hierarchy; the CLI maps these onto exit codes."""


class HolonormError(Exception):
    """Base class for library errors."""


class DimensionError(HolonormError, ValueError):
    pass


class IllConditionedError(HolonormError, ValueError):
    pass


class ToleranceConflictError(HolonormError, ValueError):
    """A multi-index is neither clearly resonant nor clearly separated."""


class ConstraintError(HolonormError, ValueError):
    pass


class ValidationError(HolonormError, ValueError):
    """An input chain or spectrum fails its structural checks."""


class PipelineError(HolonormError, RuntimeError):
    """A normalization stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class ResonanceError(PipelineError):
    """Homological equation refused at a (near) resonant block/monomial."""

    def __init__(self, j, alpha, weight, b):
        self.j = j
        self.alpha = tuple(alpha)
        self.weight = weight
        self.b = b
        super().__init__(
            "solve_homological",
            f"resonant index j={j}, alpha={self.alpha}: |weight| = {abs(weight):.3g} <= b = {b:.3g}",
        )


class OrbitError(HolonormError, RuntimeError):
    """Backward-orbit construction failed (critical point, Newton failure)."""
