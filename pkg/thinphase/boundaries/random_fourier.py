import logging

import environ
import numpy as np

from ..common import make_rng
from ..exceptions import ConfigurationError
from .base import BoundaryGenerator

# Module-level logger
log = logging.getLogger(__name__)

# child stream reserved for boundary data
BOUNDARY_STREAM = 1


class RandomFourierBoundary(BoundaryGenerator):
    """
    A random cosine series over the box, clipped at zero. The series is
    drawn from child stream 1 of ``seed`` (the generator's own seed if
    configured, else the scenario seed).
    """
    kind = "random"
    shorthand = "seed"

    @environ.config(prefix="RANDOM")
    class Config(object):
        seed = environ.var(None)
        modes = environ.var(None)
        amplitude = environ.var(None)

    def __init__(self, **kwargs):
        super(RandomFourierBoundary, self).__init__(**kwargs)
        seed = kwargs.get("seed")
        try:
            self.seed = None if seed is None else int(seed)
            self.modes = int(kwargs.get("modes", 4))
        except (TypeError, ValueError) as exc:
            raise ConfigurationError("boundary.seed and boundary.modes must be integers", root_exception=exc)
        self.amplitude = self._number(kwargs, "amplitude", 1.0)
        if self.modes < 1 or self.amplitude <= 0.0:
            raise ConfigurationError("boundary.modes and boundary.amplitude must be positive")
        self.options = {"seed": self.seed, "modes": self.modes, "amplitude": self.amplitude}

    def generate(self, grid, seed=0):
        seed = self.seed if self.seed is not None else seed
        rng = make_rng(seed, stream=BOUNDARY_STREAM)
        R = grid.spec.half_extent
        coords = grid.coordinates()
        values = np.full(grid.shape, self.amplitude * rng.uniform(0.2, 1.0))
        for m in range(1, self.modes + 1):
            wave = rng.integers(0, self.modes + 1, size=grid.ndim)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            weight = self.amplitude * rng.uniform(-1.0, 1.0) / m
            argument = sum(np.pi * wave[axis] * coords[axis] / R for axis in range(grid.ndim))
            values = values + weight * np.cos(argument + phase)
        log.debug("Random boundary data from seed %d: range [%.4f, %.4f]", seed, values.min(), values.max())
        return np.maximum(values, 0.0)
