import argparse
import inspect
import logging
import os
import pathlib
import sys
import textwrap

from thinphase import __version__
from thinphase.diagnostics import competitor_log_cutoff, extract_free_boundary
from thinphase.energy import weiss_profile
from thinphase.exceptions import (
    ConfigurationError, ThinPhaseError, ValidationFailure
)
from thinphase.extension import ThinFunction, trivial_solution
from thinphase.fileformat import read_field, write_field, write_mask, write_thin
from thinphase.grid import GridSpec, build_grid
from thinphase.solver import minimize
import thinphase.config
import thinphase.reports
import thinphase.validation

log = logging.getLogger("thinphase")

FIELD_FILE = "field.thph"
MASK_FILE = "mask.thph"
TRACE_FILE = "trace.thph"
STRATA_FIELDS = ["point", "k", "member", "min_distance"]
BETA_FIELDS = ["point", "r", "k", "beta_sq", "mass"]
WEISS_FIELDS = ["r", "psi", "deficit_from_prev", "identity_gap"]


class NewlinesHelpFormatter(argparse.RawDescriptionHelpFormatter):
    """Custom help formatter to insert newlines between argument help texts.
    """
    def _split_lines(self, text, width):
        text = self._whitespace_matcher.sub(" ", text).strip()
        txt = textwrap.wrap(text, width)
        txt[-1] += "\n"
        return txt


def _common_argparser():
    """Options shared by every subcommand."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "--log-level",
        default="WARN",
        type=str,
        help="The logging output level for thinphase.",
        choices=["DEBUG", "INFO", "WARN", "ERROR", "CRITICAL"],
    )
    parser.add_argument(
        "-c", "--conf-file", "--config",
        dest="conf_file",
        default=os.environ.get(
            "THINPHASE_CONFFILE", thinphase.config.DEFAULT_CONFFILE
        ),
        help=inspect.cleandoc(f"""
            Path to a JSON scenario file. Defaults to the value of the
            THINPHASE_CONFFILE environment variable or
            {thinphase.config.DEFAULT_CONFFILE}.
        """),
    )
    config_dir_group = parser.add_mutually_exclusive_group()
    config_dir_group.add_argument(
        "--conf-dir",
        default=os.environ.get(
            "THINPHASE_CONFDIR", thinphase.config.DEFAULT_CONFDIR
        ),
        help=inspect.cleandoc(f"""
            Path to a directory containing JSON configuration files with names
            ending in .json or .conf, merged over the scenario file in name
            order. Defaults to the value of the THINPHASE_CONFDIR environment
            variable or {thinphase.config.DEFAULT_CONFDIR}.
        """),
    )
    config_dir_group.add_argument(
        "--no-conf-dir",
        action="store_true",
        help=inspect.cleandoc("""
            Disable the use of any configuration directory as described for
            --conf-dir.
        """),
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Override the scenario seed.",
    )
    parser.add_argument(
        "--out",
        default=None,
        help=inspect.cleandoc("""
            Output location: a directory for `solve`, a report file for the
            other subcommands. Defaults to the scenario's output directory.
        """),
    )
    return parser


def _get_argparser():
    """Create and return an ArgumentParser for this application."""
    desc = "thinphase v{0}".format(__version__)
    parser = argparse.ArgumentParser(
        description=desc,
        formatter_class=NewlinesHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=desc)
    common = _common_argparser()
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    commands.add_parser(
        "solve", parents=[common], formatter_class=NewlinesHelpFormatter,
        help="Minimise the scenario and write field, mask, trace and energy report.",
    )
    for name, text in (
        ("diagnose", "Full diagnostics report for a field file."),
        ("weiss", "Weiss density profile of a field file as CSV."),
        ("strata", "Strata membership and beta numbers of a field's free boundary as CSV."),
    ):
        sub = commands.add_parser(name, parents=[common], formatter_class=NewlinesHelpFormatter, help=text)
        sub.add_argument("--field", required=True, help="THINPH1 field file to analyse.")
        sub.add_argument(
            "--center", type=float, nargs="+", default=None,
            help="Thin point to centre the analysis on (default: the origin).",
        )

    competitor = commands.add_parser(
        "competitor", parents=[common], formatter_class=NewlinesHelpFormatter,
        help="Logarithmic cut-off competitor test on the two dimensional cone.",
    )
    competitor.add_argument(
        "--radius", type=float, action="append", default=None,
        help="Cut-off scale R, repeatable (default: 2 and 4).",
    )

    validate = commands.add_parser(
        "validate", parents=[common], formatter_class=NewlinesHelpFormatter,
        help="Run the acceptance suite and print a pass/fail table.",
    )
    validate.add_argument(
        "--filter", action="append", default=None,
        help="Criterion number, name or tag to run; repeatable or comma separated.",
    )
    return parser


def _scenario(args):
    try:
        configuration = thinphase.config.load_config(
            args.conf_file,
            args.conf_dir if not args.no_conf_dir else None,
        )
    except (OSError, TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc), root_exception=exc)
    return thinphase.config.build_scenario(configuration, seed=args.seed)


def _meta(scenario, spec):
    return thinphase.reports.provenance(spec, seed=scenario.seed, digest=scenario.digest)


def _report_path(args, scenario, default):
    return pathlib.Path(args.out) if args.out else scenario.output_dir / default


def _center(args, grid):
    if args.center is None:
        return (0.0,) * grid.n
    if len(args.center) != grid.n:
        raise ConfigurationError(
            "--center needs {} coordinates for this field".format(grid.n)
        )
    return tuple(args.center)


def cmd_solve(args, scenario):
    out = pathlib.Path(args.out) if args.out else scenario.output_dir
    grid = build_grid(scenario.grid_spec)
    boundary = scenario.boundary.generate(grid, scenario.seed)
    result = minimize(grid, boundary, scenario.solver)
    meta = _meta(scenario, grid.spec)
    write_field(out / FIELD_FILE, result.field, meta)
    write_mask(out / MASK_FILE, result.mask, meta)
    write_thin(out / TRACE_FILE, ThinFunction.from_field(result.field), meta)
    thinphase.reports.write_json(out / "energy.json", thinphase.reports.energy_report(result, meta))
    print("energy {:.10g} (dirichlet {:.10g}, thin area {:.10g}), {} sweep(s), {}".format(
        result.energy.total, result.energy.dirichlet, result.energy.thin_area,
        result.iterations, "converged" if result.converged else "NOT converged",
    ))
    if not result.converged:
        log.error("Solver did not converge; outputs written to %s", out)
        return 3
    return 0


def cmd_diagnose(args, scenario):
    field, provenance = read_field(args.field)
    meta = provenance or _meta(scenario, field.spec)
    report, profile = thinphase.reports.diagnostic_report(
        field, meta, scenario.diagnostics, center=_center(args, field.grid),
    )
    path = _report_path(args, scenario, "diagnostics.json")
    thinphase.reports.write_json(path, report)
    if profile is not None:
        thinphase.reports.write_csv(path.with_name(path.stem + "-weiss.csv"), WEISS_FIELDS, profile.rows(), meta)
    if report["free_boundary"]["empty"]:
        print("empty free boundary")
    else:
        print("{} free boundary nodes; origin class {}".format(
            report["free_boundary"]["count"], report["origin"]["class"],
        ))
    return 0


def cmd_weiss(args, scenario):
    field, provenance = read_field(args.field)
    meta = provenance or _meta(scenario, field.spec)
    profile = weiss_profile(field, _center(args, field.grid), scenario.diagnostics.radii)
    path = _report_path(args, scenario, "weiss.csv")
    thinphase.reports.write_csv(path, WEISS_FIELDS, profile.rows(), meta)
    for row in profile.rows():
        print("{r:>10.5g} {psi:>14.8g}".format(**row))
    return 0


def cmd_strata(args, scenario):
    field, provenance = read_field(args.field)
    meta = provenance or _meta(scenario, field.spec)
    free_boundary = extract_free_boundary(field)
    path = _report_path(args, scenario, "strata.csv")
    rows = thinphase.reports.strata_rows(field, free_boundary)
    thinphase.reports.write_csv(path, STRATA_FIELDS, rows, meta)
    beta = thinphase.reports.beta_rows(field, free_boundary, scenario.diagnostics.radii, max(field.grid.n - 1, 0))
    thinphase.reports.write_csv(path.with_name(path.stem + "-beta.csv"), BETA_FIELDS, beta, meta)
    print("{} strata rows, {} beta rows".format(len(rows), len(beta)))
    return 0


def cmd_competitor(args, scenario):
    alpha = scenario.grid_spec.alpha
    rows = []
    for R in args.radius or (2.0, 4.0):
        spec = GridSpec(2, alpha, R ** 2, R ** 2 / 32.0)
        delta, bound = competitor_log_cutoff(trivial_solution(build_grid(spec), (0.0, 1.0)), R)
        rows.append({"R": R, "delta": delta, "bound": bound, "holds": delta <= bound})
        print("R={:g}: delta {:.6g} <= bound {:.6g}: {}".format(R, delta, bound, delta <= bound))
    report = {"provenance": _meta(scenario, scenario.grid_spec), "rows": rows}
    thinphase.reports.write_json(_report_path(args, scenario, "competitor.json"), report)
    return 0 if all(row["holds"] for row in rows) else 1


def cmd_validate(args, scenario):
    try:
        results = thinphase.validation.validate(args.filter)
    except ValidationFailure as exc:
        if exc.results is not None:
            print(thinphase.validation.format_table(exc.results))
        raise
    print(thinphase.validation.format_table(results))
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "diagnose": cmd_diagnose,
    "weiss": cmd_weiss,
    "strata": cmd_strata,
    "competitor": cmd_competitor,
    "validate": cmd_validate,
}


def main(argv=None):
    thinphase_parser = _get_argparser()
    thinphase_args = thinphase_parser.parse_args(argv)
    log.setLevel(thinphase_args.log_level)
    try:
        scenario = _scenario(thinphase_args)
        status = COMMANDS[thinphase_args.command](thinphase_args, scenario)
    except ThinPhaseError as exc:
        log.error("%s", exc)
        print("error: {}".format(exc), file=sys.stderr)
        status = exc.status
    return status


if __name__ == "__main__":
    sys.exit(main())
