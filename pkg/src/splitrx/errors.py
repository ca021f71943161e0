"""Exception types shared across the package."""


class InvalidOrder(ValueError):
    """Unsupported constellation size or ring layout."""


class SplitterDegenerate(ValueError):
    """A detector was asked to run at a splitting ratio where it is undefined."""


class DegenerateDensity(ValueError):
    """A post-processing noise variance is zero, so the likelihood is a point mass."""


class GainUndefined(ArithmeticError):
    """Joint processing gain has a zero denominator at this power level."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``line`` points into the source text."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
