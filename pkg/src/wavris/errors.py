"""Exception and warning types raised across the package."""


class ConfigurationError(ValueError):
    """Inconsistent or invalid configuration values."""


class DimensionError(ValueError):
    """Array operands whose shapes do not agree.

    The ``operand`` attribute names the offending argument.
    """

    def __init__(self, operand, message):
        super().__init__(f"{operand}: {message}")
        self.operand = operand


class BiasRangeError(ValueError):
    """A bias voltage lies outside the varactor's allowed reverse-bias range."""

    def __init__(self, value, v_min, v_max):
        super().__init__(f"bias {value!r} V outside allowed range [{v_min}, {v_max}] V")
        self.value = value
        self.v_min = v_min
        self.v_max = v_max


class RealizabilityError(ValueError):
    """A bias configuration drives one or more elements outside the varactor range."""

    def __init__(self, elements, values, v_min, v_max):
        elements = list(elements)
        super().__init__(
            f"{len(elements)} element(s) outside [{v_min}, {v_max}] V: "
            + ", ".join(f"#{i}={v:.6g}" for i, v in zip(elements, values))
        )
        self.elements = elements
        self.values = list(values)


class RankError(ValueError):
    """A sampled basis matrix is numerically singular."""


class DegenerateChannelError(ValueError):
    """All cascaded coefficients and the direct path vanish."""


class ConditioningWarning(UserWarning):
    """Least-squares design matrix is rank deficient or badly conditioned."""

    def __init__(self, message, condition_number):
        super().__init__(message)
        self.condition_number = condition_number


class ModeFrequencyWarning(UserWarning):
    """A biasing mode frequency is not well below the RF carrier."""


class ScenarioError(ValueError):
    """Scenario validation failed; ``errors`` lists every violated field."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))
