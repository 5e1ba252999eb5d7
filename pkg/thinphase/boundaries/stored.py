import logging
import pathlib

import environ

from ..exceptions import ConfigurationError
from ..fileformat import read_field
from .base import BoundaryGenerator

# Module-level logger
log = logging.getLogger(__name__)


class StoredBoundary(BoundaryGenerator):
    """Boundary values taken from a THINPH1 field file on the same grid."""
    kind = "file"
    shorthand = "path"

    @environ.config(prefix="FILE")
    class Config(object):
        path = environ.var(None)

    def __init__(self, **kwargs):
        super(StoredBoundary, self).__init__(**kwargs)
        path = kwargs.get("path")
        if not path:
            raise ConfigurationError("boundary.path: required by the file generator")
        self.path = pathlib.Path(path)
        if not self.path.is_file():
            raise ConfigurationError("boundary.path: {} does not exist".format(self.path))
        self.options = {"path": str(self.path)}

    def generate(self, grid, seed=0):
        field, _ = read_field(self.path)
        if field.spec != grid.spec:
            raise ConfigurationError(
                "boundary.path: {} holds a field for {!r}, expected {!r}".format(self.path, field.spec, grid.spec)
            )
        return field.values
