import json
import json.decoder
import logging
import pathlib
from unittest import mock

import appdirs
import pytest
import pytest_subtests  # noqa: F401

from thinphase.boundaries.analytic import ConstantBoundary, TrivialTraceBoundary
from thinphase.boundaries.random_fourier import RandomFourierBoundary
import thinphase.config as t_cfg
from thinphase.exceptions import ConfigurationError
from thinphase.grid import GridSpec
import thinphase.version as t_vers

pytestmark = pytest.mark.usefixtures("empty_environ")


def _dump(path, data):
    with path.open("w") as fh:
        json.dump(data, fh)
    return path


def _scenario(conf_file=None, conf_dir=None, env=None):
    with mock.patch.dict("os.environ", env or {}, clear=True):
        return t_cfg.build_scenario(t_cfg.load_config(conf_file=conf_file, conf_dir=conf_dir))


def test_site_config_follows_major_version():
    major = t_vers.__version__.split(".")[0]
    site = pathlib.Path(appdirs.AppDirs("thinphase", "thinphase", version=major).site_config_dir).resolve()
    assert t_cfg.DEFAULT_CONFFILE == site / "thinphase.conf"
    assert t_cfg.DEFAULT_CONFDIR == site / "config.d"
    assert t_cfg.load_config.__defaults__ == (t_cfg.DEFAULT_CONFFILE, t_cfg.DEFAULT_CONFDIR)


def test_missing_defaults_give_default_scenario(tmp_path):
    conf_file = tmp_path / "thinphase.conf"
    conf_dir = tmp_path / "config.d"
    with mock.patch("thinphase.config.DEFAULT_CONFFILE", conf_file), \
            mock.patch("thinphase.config.DEFAULT_CONFDIR", conf_dir):
        config_data = t_cfg.load_config(conf_file=conf_file, conf_dir=conf_dir)
    assert config_data == {}
    scenario = t_cfg.build_scenario(config_data)
    assert scenario.grid_spec == GridSpec(1, 0.5, 1.0, 0.0625)
    assert isinstance(scenario.boundary, TrivialTraceBoundary)


@pytest.mark.parametrize("argument", ("conf_file", "conf_dir"))
def test_explicit_paths_must_exist(tmp_path, argument):
    with pytest.raises(FileNotFoundError, match="absent"):
        t_cfg.load_config(**{argument: tmp_path / "absent"})


def test_load_config_logging(tmp_path, caplog):
    conf_file = _dump(tmp_path / "thinphase.conf", {"grid": {"spacing": 0.125}})
    caplog.set_level(logging.DEBUG, logger="thinphase.config")
    t_cfg.load_config(conf_file=conf_file, conf_dir=None)
    assert f"load configuration from '{conf_file}'" in caplog.text
    assert any('"spacing": 0.125' in record.message for record in caplog.records)


def test_files_merge_in_name_order(tmp_path):
    conf_file = _dump(tmp_path / "scenario.json", {"grid": {"spacing": 0.25}, "seed": 3})
    conf_dir = tmp_path / "config.d"
    conf_dir.mkdir()
    _dump(conf_dir / "10-grid.json", {"grid": {"spacing": 0.125}})
    _dump(conf_dir / "20-grid.conf", {"grid": {"spacing": 0.0625}, "solver": {"starts": 2}})
    _dump(conf_dir / "30-ignored.txt", {"seed": 99})
    (conf_dir / "40-subdir.json").mkdir()
    scenario = _scenario(conf_file, conf_dir)
    assert scenario.grid_spec == GridSpec(1, 0.5, 1.0, 0.0625)
    assert scenario.solver.starts == 2
    assert scenario.seed == 3


@pytest.mark.parametrize("text, error, match", (
    ("[1, 2]", TypeError, "must contain a JSON object"),
    ("42", TypeError, "must contain a JSON object"),
    ("{,}", ValueError, "Invalid JSON"),
    ('{"trailing": "comma",}', ValueError, "Invalid JSON"),
))
def test_files_must_hold_json_objects(text, error, match, subtests, tmp_path):
    conf_file = tmp_path / "thinphase.conf"
    conf_file.write_text(text)
    with subtests.test(msg="config file"):
        with pytest.raises(error, match=match):
            t_cfg.load_config(conf_file=conf_file, conf_dir=None)
    with subtests.test(msg="config dir"):
        with pytest.raises(error, match=match) as exc:
            t_cfg.load_config(conf_file=None, conf_dir=tmp_path)
        if error is ValueError:
            assert isinstance(exc.value.__cause__, json.decoder.JSONDecodeError)


@pytest.mark.parametrize("data, match", (
    ({"mesh": {"n": 1}}, "Unknown configuration section"),
    ({"grid": {"depth": 2}}, "grid.depth: unknown key"),
    ({"solver": {"sweeps": 2}}, "solver.sweeps: unknown key"),
    ({"diagnostics": {"plots": True}}, "diagnostics.plots: unknown key"),
    ({"diagnostics": {"radii": [0.25, 0.25]}}, "strictly increasing"),
    ({"diagnostics": {"radii": [0.0, 0.25]}}, "strictly increasing"),
    ({"diagnostics": {"lambda": "sometimes"}}, "diagnostics.lambda: expected a boolean"),
    ({"boundary": {"generator": "constant", "value": {"x": 1}}}, "boundary.value: nested objects"),
))
def test_file_values_are_validated(data, match, subtests, tmp_path):
    with subtests.test(msg="config file"):
        conf_file = _dump(tmp_path / "thinphase.conf", data)
        with pytest.raises(ConfigurationError, match=match):
            _scenario(conf_file=conf_file)
    with subtests.test(msg="config dir"):
        conf_dir = tmp_path / "config.d"
        conf_dir.mkdir(exist_ok=True)
        _dump(conf_dir / "50-site.json", data)
        with pytest.raises(ConfigurationError, match=match):
            _scenario(conf_dir=conf_dir)


def test_later_file_replaces_radii(tmp_path):
    conf_dir = tmp_path / "config.d"
    conf_dir.mkdir()
    _dump(conf_dir / "10-radii.json", {"diagnostics": {"radii": [0.1, 0.2, 0.3]}})
    _dump(conf_dir / "20-radii.json", {"diagnostics": {"radii": [0.25, 0.5]}})
    assert _scenario(conf_dir=conf_dir).diagnostics.radii == (0.25, 0.5)


def test_boolean_spellings(tmp_path):
    conf_file = _dump(tmp_path / "thinphase.conf", {"diagnostics": {"weiss": "off", "strata": "yes"}})
    diagnostics = _scenario(conf_file).diagnostics
    assert diagnostics.weiss is False
    assert diagnostics.strata is True
    assert diagnostics.lambda_ is True


def test_environment_overrides_files(tmp_path):
    conf_file = _dump(tmp_path / "thinphase.conf", {"grid": {"n": 1, "spacing": 0.25}, "seed": 1})
    env = {
        "THINPHASE_GRID_SPACING": "0.125",
        "THINPHASE_SEED": "8",
        "THINPHASE_SOLVER_STARTS": "4",
        "THINPHASE_OUTPUT_DIRECTORY": "runs",
    }
    scenario = _scenario(conf_file, env=env)
    assert scenario.grid_spec == GridSpec(1, 0.5, 1.0, 0.125)
    assert scenario.seed == 8
    assert scenario.solver.starts == 4
    assert scenario.output_dir == pathlib.Path("runs")


def test_environment_solver_is_validated():
    with pytest.raises(ConfigurationError, match="starts"):
        _scenario(env={"THINPHASE_SOLVER_STARTS": "9"})
    with pytest.raises(ConfigurationError, match="solver.starts: expected int"):
        _scenario(env={"THINPHASE_SOLVER_STARTS": "many"})


def test_environment_generator_options(subtests):
    with subtests.test(msg="constant"):
        env = {"THINPHASE_BOUNDARY_GENERATOR": "constant", "THINPHASE_BOUNDARY_CONSTANT_VALUE": "2.5"}
        with mock.patch.dict("os.environ", env, clear=True):
            assert t_cfg.load_config(conf_file=None, conf_dir=None) == {
                "boundary": {"generator": "constant", "value": "2.5"},
            }
        boundary = _scenario(env=env).boundary
        assert isinstance(boundary, ConstantBoundary)
        assert boundary.value == 2.5
    with subtests.test(msg="trivial-trace"):
        boundary = _scenario(env={
            "THINPHASE_BOUNDARY_GENERATOR": "trivial-trace",
            "THINPHASE_BOUNDARY_TRIVIAL_TRACE_DIRECTION": "-1",
            "THINPHASE_BOUNDARY_TRIVIAL_TRACE_AMPLITUDE": "1",
        }).boundary
        assert isinstance(boundary, TrivialTraceBoundary)
        assert boundary.direction == [-1.0]
        assert boundary.amplitude == 1.0
    with subtests.test(msg="random shorthand"):
        boundary = _scenario(env={
            "THINPHASE_BOUNDARY_GENERATOR": "random:5",
            "THINPHASE_BOUNDARY_RANDOM_MODES": "2",
        }).boundary
        assert isinstance(boundary, RandomFourierBoundary)
        assert (boundary.seed, boundary.modes) == (5, 2)


def test_environment_options_for_default_generator():
    boundary = _scenario(env={"THINPHASE_BOUNDARY_TRIVIAL_TRACE_AMPLITUDE": "0.5"}).boundary
    assert isinstance(boundary, TrivialTraceBoundary)
    assert boundary.amplitude == 0.5


def test_environment_generator_over_file(tmp_path):
    conf_file = _dump(tmp_path / "thinphase.conf", {"boundary": {"generator": "random", "modes": 2}})
    env = {"THINPHASE_BOUNDARY_GENERATOR": "constant", "THINPHASE_BOUNDARY_CONSTANT_VALUE": "1"}
    # options of the file's generator stay in the merged section
    with pytest.raises(ConfigurationError, match="boundary.modes: unknown option for 'constant'"):
        _scenario(conf_file, env=env)
    env["THINPHASE_BOUNDARY_GENERATOR"] = "random"
    boundary = _scenario(conf_file, env=env).boundary
    assert isinstance(boundary, RandomFourierBoundary)
    assert boundary.modes == 2
