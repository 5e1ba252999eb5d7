import importlib
import importlib.metadata
import inspect
import logging
import pkgutil
import sys

import attr
import environ

from ..exceptions import ConfigurationError
from . import base

log = logging.getLogger(__name__)

# Walk this package and import all sub-modules so they can register generators
_paths = sys.modules[__name__].__path__
for _, subname, _ in pkgutil.walk_packages(_paths):
    try:
        mod_obj = importlib.import_module(__name__ + "." + subname)
    except ImportError as exc:
        log.warning("Skipping import of %r boundary generator: %s", subname, exc)
    else:
        if "." not in subname:
            globals()[subname] = mod_obj

# Load all defined generator entry points - we orphan them after loading rather
# than injecting them into this module, instead relying on the metaclass
for ep in importlib.metadata.entry_points(group="thinphase.boundaries"):
    ep_obj = ep.load()
    if inspect.isclass(ep_obj):
        base.BoundaryRegistry.register(ep.name, ep_obj)


# Finally we define a top-level environ config class which includes any configs
# defined in the registered generators
@environ.config(prefix="BOUNDARY")
class BoundaryConfig(object):
    for name, clsobj in base.BoundaryRegistry.iter_():
        # We have to use a magic attribute name here since `config`s don't have
        # a specific mixin or type we can check for
        try:
            locals()[base.config_name(name)] = environ.group(clsobj.Config, optional=True)
        except AttributeError:
            pass
    generator = environ.var(None)


def parse_generator(text):
    """Split ``"kind:argument"`` into ``(kind, argument or None)``."""
    kind, sep, argument = str(text).partition(":")
    return kind.strip(), (argument.strip() if sep else None)


def get_generator(section):
    """
    Build the boundary generator named by ``section["generator"]``; the
    remaining keys of the section are passed as options.
    """
    section = dict(section)
    kind, argument = parse_generator(section.pop("generator", "trivial-trace"))
    try:
        clsobj = base.BoundaryRegistry.get(kind)
    except KeyError:
        raise ConfigurationError("boundary.generator: unknown generator {!r}".format(kind))
    if clsobj.kind is None:
        raise ConfigurationError("boundary.generator: {!r} is not a concrete generator".format(kind))
    if argument is not None:
        if clsobj.shorthand is None:
            raise ConfigurationError("boundary.generator: {!r} takes no argument".format(kind))
        section.setdefault(clsobj.shorthand, argument)
    options = getattr(clsobj, "Config", None)
    if inspect.isclass(options) and attr.has(options):
        unknown = set(section) - {field.name for field in attr.fields(options)}
        if unknown:
            raise ConfigurationError("boundary.{}: unknown option for {!r}".format(sorted(unknown)[0], kind))
    return clsobj(**section)
