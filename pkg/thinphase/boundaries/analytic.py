import logging

import environ
import numpy as np

from ..exceptions import ConfigurationError
from ..extension import minimizing_amplitude, trivial_solution
from .base import BoundaryGenerator

# Module-level logger
log = logging.getLogger(__name__)


def _direction(value):
    if value is None:
        return None
    if isinstance(value, str):
        value = [v for v in value.replace(" ", "").split(",") if v]
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ConfigurationError("boundary.direction: expected a list of numbers", root_exception=exc)


class ConstantBoundary(BoundaryGenerator):
    """Boundary values identically equal to ``value``."""
    kind = "constant"
    shorthand = "value"

    @environ.config(prefix="CONSTANT")
    class Config(object):
        value = environ.var(None)

    def __init__(self, **kwargs):
        super(ConstantBoundary, self).__init__(**kwargs)
        self.value = self._number(kwargs, "value", 0.0)
        if not np.isfinite(self.value) or self.value < 0.0:
            raise ConfigurationError("boundary.value: must be finite and nonnegative, got {}".format(self.value))
        self.options = {"value": self.value}

    def generate(self, grid, seed=0):
        return np.full(grid.shape, self.value)


class TrivialTraceBoundary(BoundaryGenerator):
    """
    Values of the closed-form half-space solution along ``direction``,
    scaled by ``amplitude`` (default: the minimising amplitude for the
    grid's ``alpha``, so the half-line is the minimiser's ZERO set).
    """
    kind = "trivial-trace"

    @environ.config(prefix="TRIVIAL_TRACE")
    class Config(object):
        direction = environ.var(None)
        amplitude = environ.var(None)

    def __init__(self, **kwargs):
        super(TrivialTraceBoundary, self).__init__(**kwargs)
        self.direction = _direction(kwargs.get("direction"))
        self.amplitude = None if kwargs.get("amplitude") is None else self._number(kwargs, "amplitude")
        if self.amplitude is not None and not (np.isfinite(self.amplitude) and self.amplitude > 0.0):
            raise ConfigurationError("boundary.amplitude: must be finite and positive, got {}".format(self.amplitude))
        self.options = {
            key: value for key, value in (("direction", self.direction), ("amplitude", self.amplitude))
            if value is not None
        }

    def generate(self, grid, seed=0):
        amplitude = self.amplitude
        if amplitude is None:
            amplitude = minimizing_amplitude(grid.spec.alpha)
        try:
            return amplitude * trivial_solution(grid, self.direction).values
        except ValueError as exc:
            raise ConfigurationError("boundary.direction: {}".format(exc), root_exception=exc)
