import logging

from ..exceptions import ConfigurationError

# Module-level logger
log = logging.getLogger(__name__)


class BoundaryRegistry(type):
    __SUBCLASS_MAP = dict()

    def __new__(mcls, name, bases, attrs):
        clsobj = super(BoundaryRegistry, mcls).__new__(mcls, name, bases, attrs)
        mcls.register(attrs.get("kind") or name, clsobj)
        return clsobj

    @classmethod
    def register(mcls, kind, clsobj):
        if mcls.__SUBCLASS_MAP.get(kind, clsobj) is not clsobj:
            raise ValueError(
                "Boundary generator name {!r} registered more than once"
                .format(kind)
            )
        mcls.__SUBCLASS_MAP[kind] = clsobj

    @classmethod
    def get(mcls, kind):
        return mcls.__SUBCLASS_MAP[kind]

    @classmethod
    def iter_(mcls):
        yield from mcls.__SUBCLASS_MAP.items()


def config_name(kind):
    """Attribute-safe name of a generator kind, e.g. ``trivial_trace``."""
    return kind.replace("-", "_")


class BoundaryGenerator(object, metaclass=BoundaryRegistry):
    """
    Source of nonnegative outer boundary values.

    Subclasses set ``kind`` (the name used in scenarios), may declare a
    nested environ ``Config`` and implement :meth:`generate`. The short
    form ``kind:argument`` of a scenario maps ``argument`` onto
    ``shorthand``.
    """
    kind = None
    shorthand = None

    def __init__(self, **kwargs):
        self.options = kwargs

    def generate(self, grid, seed=0):
        """
        Fill:
            Returns node values on ``grid``; only the outer boundary nodes
            are used by the solver.

        Args:
            grid (Grid): target grid.
            seed (int): scenario seed, for generators that draw randomly.

        Returns:
            ndarray: values of shape ``grid.shape``.
        """
        raise NotImplementedError()

    def describe(self):
        description = {"generator": self.kind}
        description.update(self.options)
        return description

    @staticmethod
    def _number(options, key, default=None):
        value = options.get(key, default)
        try:
            return float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError("boundary.{}: expected a number, got {!r}".format(key, value), root_exception=exc)
