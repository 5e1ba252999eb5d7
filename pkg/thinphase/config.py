import collections.abc
import json
import logging
import pathlib

import appdirs
import attr
import environ
import jsonmerge
import packaging.version

from . import boundaries
from . import version as _thinphase_version
from .common import LazyJSONDumper, stable_hash
from .exceptions import ConfigurationError, GridError, ThinPhaseError
from .grid import GridSpec
from .solver import SolveConfig

# Site configuration lives under the current major version's directory
_curr_version = packaging.version.Version(_thinphase_version.__version__)
_appdirs = appdirs.AppDirs("thinphase", "thinphase", version=str(_curr_version.major))
_default_conf_p = pathlib.Path(_appdirs.site_config_dir).resolve()
# Set the default config file and config.d directory paths
DEFAULT_CONFFILE = _default_conf_p / "thinphase.conf"
DEFAULT_CONFDIR = _default_conf_p / "config.d"
# Configuration directories are scanned for files matching these suffixes
CONFDIR_SUFFIXES = {".json", ".conf"}
SECTIONS = ("grid", "boundary", "solver", "diagnostics", "output")
_SOLVER_TYPES = {
    "sweep_order": str, "max_outer_iters": int, "exhaustive_threshold": int, "maxiter": int, "starts": int,
}

LOGGER = logging.getLogger(__name__)

DEFAULTS = {
    "grid": {"n": 1, "alpha": 0.5, "half_extent": 1.0, "spacing": 0.0625},
    "boundary": {"generator": "trivial-trace"},
    "solver": {},
    "diagnostics": {
        "weiss": True,
        "lambda": True,
        "strata": False,
        "radii": [0.125, 0.25, 0.375, 0.5],
    },
    "output": {"directory": "thinphase-out"},
    "seed": 0,
}


@environ.config(prefix="GRID")
class GridConfig(object):
    n = environ.var(None)
    alpha = environ.var(None)
    half_extent = environ.var(None)
    spacing = environ.var(None)


@environ.config(prefix="SOLVER")
class SolverConfig(object):
    flip_tolerance = environ.var(None)
    max_outer_iters = environ.var(None)
    exhaustive_threshold = environ.var(None)
    starts = environ.var(None)
    tolerance = environ.var(None)
    maxiter = environ.var(None)


@environ.config(prefix="OUTPUT")
class OutputConfig(object):
    directory = environ.var(None)


@environ.config(prefix="THINPHASE")
class ThinPhaseConfig(object):
    grid = environ.group(GridConfig)
    boundary = environ.group(boundaries.BoundaryConfig)
    solver = environ.group(SolverConfig)
    output = environ.group(OutputConfig)
    seed = environ.var(None)

    @classmethod
    def __strip(cls, dict_):
        for k, v in tuple(dict_.items()):
            if isinstance(v, dict):
                cls.__strip(v)
            if v is None or v == {}:
                del dict_[k]

    def as_dict(self):
        dictified = attr.asdict(self)
        self.__strip(dictified)
        return dictified


def _load_config_file(conf_file_p):
    try:
        config_data = json.load(conf_file_p.open())
    except json.decoder.JSONDecodeError as exc:
        raise ValueError(
            f"Invalid JSON data in {conf_file_p} (line {exc.lineno}, column {exc.colno})"
        ) from exc
    if not isinstance(config_data, collections.abc.Mapping):
        raise TypeError(f"{conf_file_p} must contain a JSON object")
    return config_data


def load_config(conf_file=DEFAULT_CONFFILE, conf_dir=DEFAULT_CONFDIR):
    LOGGER.debug(
        "Attempting to load configuration from '%s' and '%s'",
        conf_file, conf_dir,
    )
    conf_files = list()
    # Sanity check that both the `conf_file` and `conf_dir` exist by resolving
    # them with strictness determined by whether they are the defaults or not
    if conf_file is not None:
        conf_file_p = pathlib.Path(conf_file).resolve(
            strict=conf_file is not DEFAULT_CONFFILE
        )
        conf_files.append(conf_file_p)
    # Build a lexicographically sorted list of children of the `conf_dir` which
    # are both files and have an acceptable file suffix
    if conf_dir is not None:
        conf_dir_p = pathlib.Path(conf_dir).resolve(
            strict=conf_dir is not DEFAULT_CONFDIR
        )
        conf_dir_files = (
            p for p in conf_dir_p.iterdir() if p.suffix in CONFDIR_SUFFIXES
        )
        try:
            conf_files.extend(sorted(conf_dir_files, key=lambda p: p.name))
        except FileNotFoundError:
            pass
    LOGGER.debug(
        "Configuration files to load in order: %s",
        ", ".join(repr(str(p)) for p in conf_files),
    )
    # Start with an empty config and progressively merge in data from files
    config_data = dict()
    for conf_file_p in conf_files:
        try:
            new_data = _load_config_file(conf_file_p)
        except (FileNotFoundError, IsADirectoryError):
            # Missing defaults and sub-directories of the config dir are skipped
            pass
        else:
            LOGGER.debug(
                "Configuration data from '%s' to be merged: %s",
                conf_file_p, LazyJSONDumper(new_data, indent=2),
            )
            config_data = jsonmerge.merge(config_data, new_data)
    # Load extra configuration from the environment
    env_config = ThinPhaseConfig.from_environ().as_dict()
    LOGGER.debug(
        "Configuration data from environment to be merged: %s",
        LazyJSONDumper(env_config, indent=2),
    )
    config_data = jsonmerge.merge(config_data, env_config)
    # Environment options for the selected generator are nested under its
    # name by `environ-config`; promote them into the boundary section
    try:
        boundary_config = config_data["boundary"]
        kind, _ = boundaries.parse_generator(
            boundary_config.get("generator", DEFAULTS["boundary"]["generator"])
        )
        kind_config = boundary_config.pop(boundaries.base.config_name(kind))
    except KeyError:
        pass
    else:
        boundary_config.update(kind_config)
    LOGGER.debug(
        "Merged configuration: %s",
        LazyJSONDumper(config_data, indent=2),
    )
    return config_data


@attr.s(frozen=True)
class DiagnosticsOptions(object):
    weiss = attr.ib(default=True)
    lambda_ = attr.ib(default=True)
    strata = attr.ib(default=False)
    radii = attr.ib(default=(0.125, 0.25, 0.375, 0.5), converter=tuple)


@attr.s(frozen=True, eq=False)
class Scenario(object):
    grid_spec = attr.ib()
    boundary = attr.ib()
    solver = attr.ib()
    diagnostics = attr.ib()
    output_dir = attr.ib()
    seed = attr.ib()
    source = attr.ib(factory=dict)

    @property
    def digest(self):
        return stable_hash(self.source)


def _bool(section, key, value):
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("1", "true", "yes", "on", "0", "false", "no", "off"):
        return value.lower() in ("1", "true", "yes", "on")
    raise ConfigurationError("{}.{}: expected a boolean, got {!r}".format(section, key, value))


def _coerce(name, value, kind):
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(
            "{}: expected {}, got {!r}".format(name, kind.__name__, value), root_exception=exc,
        )


def _check_flat(config_data):
    unknown = set(config_data) - set(SECTIONS) - {"seed"}
    if unknown:
        raise ConfigurationError("Unknown configuration section(s): {}".format(", ".join(sorted(unknown))))
    for section in SECTIONS:
        body = config_data.get(section, {})
        if not isinstance(body, collections.abc.Mapping):
            raise ConfigurationError("{}: section must be a JSON object".format(section))
        for key, value in body.items():
            if isinstance(value, collections.abc.Mapping):
                raise ConfigurationError("{}.{}: nested objects are not allowed".format(section, key))


def build_scenario(config_data, seed=None, output_dir=None):
    """
    Validate merged configuration data and produce a :class:`Scenario`.
    ``seed`` and ``output_dir`` override the configured values.

    Raises:
        ConfigurationError: naming the offending section and key.
    """
    _check_flat(config_data)
    merged = jsonmerge.merge(DEFAULTS, dict(config_data))
    if seed is not None:
        merged["seed"] = seed
    if output_dir is not None:
        merged["output"] = dict(merged["output"], directory=str(output_dir))

    grid = merged["grid"]
    unknown = set(grid) - {"n", "alpha", "half_extent", "spacing"}
    if unknown:
        raise ConfigurationError("grid.{}: unknown key".format(sorted(unknown)[0]))
    try:
        grid_spec = GridSpec(
            _coerce("grid.n", grid["n"], int),
            _coerce("grid.alpha", grid["alpha"], float),
            _coerce("grid.half_extent", grid["half_extent"], float),
            _coerce("grid.spacing", grid["spacing"], float),
        )
    except GridError as exc:
        raise ConfigurationError("grid: {}".format(exc.message), root_exception=exc)

    solver_section = merged["solver"]
    fields = {f.name: f for f in attr.fields(SolveConfig)}
    solver_kwargs = {}
    for key, value in solver_section.items():
        if key not in fields:
            raise ConfigurationError("solver.{}: unknown key".format(key))
        kind = _SOLVER_TYPES.get(key, float)
        solver_kwargs[key] = _coerce("solver." + key, value, kind)
    solver = SolveConfig(**solver_kwargs)

    try:
        generator = boundaries.get_generator(merged["boundary"])
    except ThinPhaseError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError("boundary: {}".format(exc), root_exception=exc)

    diag = merged["diagnostics"]
    unknown = set(diag) - {"weiss", "lambda", "strata", "radii"}
    if unknown:
        raise ConfigurationError("diagnostics.{}: unknown key".format(sorted(unknown)[0]))
    radii = diag["radii"]
    if isinstance(radii, str):
        radii = [r for r in radii.split(",") if r.strip()]
    radii = tuple(_coerce("diagnostics.radii", r, float) for r in radii)
    if any(b <= a for a, b in zip(radii, radii[1:])) or not radii or radii[0] <= 0:
        raise ConfigurationError("diagnostics.radii: must be positive and strictly increasing")
    diagnostics = DiagnosticsOptions(
        weiss=_bool("diagnostics", "weiss", diag["weiss"]),
        lambda_=_bool("diagnostics", "lambda", diag["lambda"]),
        strata=_bool("diagnostics", "strata", diag["strata"]),
        radii=radii,
    )

    scenario = Scenario(
        grid_spec=grid_spec,
        boundary=generator,
        solver=solver,
        diagnostics=diagnostics,
        output_dir=pathlib.Path(merged["output"]["directory"]),
        seed=_coerce("seed", merged["seed"], int),
        source=merged,
    )
    LOGGER.info("Scenario %s: %r, boundary %s", scenario.digest[:12], grid_spec, generator.describe())
    return scenario
