import pathlib

import pytest
import pytest_subtests  # noqa: F401

from thinphase.boundaries.analytic import ConstantBoundary, TrivialTraceBoundary
from thinphase.boundaries.random_fourier import RandomFourierBoundary
import thinphase.config as t_cfg
from thinphase.exceptions import ConfigurationError
from thinphase.grid import GridSpec

pytestmark = pytest.mark.usefixtures("empty_environ")


def test_build_scenario_defaults():
    scenario = t_cfg.build_scenario({})
    assert scenario.grid_spec == GridSpec(1, 0.5, 1.0, 0.0625)
    assert isinstance(scenario.boundary, TrivialTraceBoundary)
    assert scenario.seed == 0
    assert scenario.output_dir == pathlib.Path("thinphase-out")
    assert scenario.diagnostics == t_cfg.DiagnosticsOptions()
    assert scenario.solver.max_outer_iters == 50


def test_build_scenario_coerces_strings():
    """
    Values from the environment arrive as strings.
    """
    scenario = t_cfg.build_scenario({
        "grid": {"n": "2", "spacing": "0.25"},
        "solver": {"max_outer_iters": "7", "flip_tolerance": "1e-8"},
        "diagnostics": {"weiss": "false", "radii": "0.25,0.5"},
        "seed": "11",
    })
    assert scenario.grid_spec == GridSpec(2, 0.5, 1.0, 0.25)
    assert scenario.solver.max_outer_iters == 7
    assert scenario.solver.flip_tolerance == 1e-8
    assert scenario.diagnostics.weiss is False
    assert scenario.diagnostics.radii == (0.25, 0.5)
    assert scenario.seed == 11


def test_build_scenario_overrides():
    scenario = t_cfg.build_scenario({"seed": 1}, seed=5, output_dir="elsewhere")
    assert scenario.seed == 5
    assert scenario.output_dir == pathlib.Path("elsewhere")


def test_build_scenario_generators(subtests):
    cases = (
        ({"generator": "constant:0"}, ConstantBoundary),
        ({"generator": "constant", "value": "1.5"}, ConstantBoundary),
        ({"generator": "random:3"}, RandomFourierBoundary),
        ({"generator": "trivial-trace", "direction": [1.0]}, TrivialTraceBoundary),
    )
    for section, cls in cases:
        with subtests.test(msg=section["generator"]):
            scenario = t_cfg.build_scenario({"boundary": section})
            assert isinstance(scenario.boundary, cls)
    with subtests.test(msg="shorthand argument"):
        scenario = t_cfg.build_scenario({"boundary": {"generator": "random:3"}})
        assert scenario.boundary.seed == 3


def test_build_scenario_digest_is_stable():
    first = t_cfg.build_scenario({"grid": {"spacing": 0.125}, "seed": 2})
    second = t_cfg.build_scenario({"seed": 2, "grid": {"spacing": 0.125}})
    third = t_cfg.build_scenario({"grid": {"spacing": 0.125}, "seed": 3})
    assert first.digest == second.digest
    assert first.digest != third.digest


@pytest.mark.parametrize("config_data, match", (
    ({"mesh": {}}, "Unknown configuration section"),
    ({"grid": []}, "grid: section must be a JSON object"),
    ({"grid": {"n": 4}}, "grid: Thin dimension"),
    ({"grid": {"alpha": 0.99}}, "grid: alpha must lie"),
    ({"grid": {"spacing": 0.3}}, "grid: Spacing 0.3 does not divide"),
    ({"grid": {"n": "two"}}, "grid.n: expected int"),
    ({"grid": {"depth": 3}}, r"grid.depth: unknown key"),
    ({"solver": {"flip_tolerance": -1}}, "solver.flip_tolerance must be nonnegative"),
    ({"solver": {"sweeps": 2}}, "solver.sweeps: unknown key"),
    ({"solver": {"sweep_order": {"kind": "x"}}}, "nested objects are not allowed"),
    ({"boundary": {"generator": "spline"}}, "unknown generator 'spline'"),
    ({"boundary": {"generator": "trivial-trace:1"}}, "takes no argument"),
    ({"boundary": {"generator": "constant:-1"}}, "must be finite and nonnegative"),
    ({"boundary": {"generator": "file"}}, "boundary.path: required"),
    ({"diagnostics": {"radii": [0.5, 0.25]}}, "strictly increasing"),
    ({"diagnostics": {"strata": "maybe"}}, "diagnostics.strata: expected a boolean"),
    ({"seed": "x"}, "seed: expected int"),
))
def test_build_scenario_errors(config_data, match):
    with pytest.raises(ConfigurationError, match=match) as exc:
        t_cfg.build_scenario(config_data)
    assert exc.value.status == 2
