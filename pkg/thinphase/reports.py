"""
Report writers: provenance records, JSON summaries and plot-ready CSV
tables.
"""
import csv
import json
import logging
import pathlib

import numpy as np

from .common import NumpyJSONEncoder, datetime_to_string, get_timestamp
from .diagnostics import (
    ClassifierConfig, annotate_free_boundary, classify_point, corkscrew_check,
    density_label, estimate_psi0, extract_free_boundary, holder_report,
    homogeneity_deviation, lambda_growth, nodal_lambda, nondegeneracy_report,
    perimeter_estimate
)
from .energy import eval_J_local, weiss_profile
from .exceptions import DiagnosticsError, GridError
from .grid import Everywhere, ThinMask
from .strata import StrataQuery, beta2, slab_measure, strata_membership
from .version import __version__

# Module-level logger
log = logging.getLogger(__name__)

TOOL = "thinphase"
STRATA_EPSILON = 1e-2
CSV_COMMENT = "# "


def provenance(spec, seed=None, digest=None):
    """Record embedded in every output file."""
    return {
        "tool": TOOL,
        "version": __version__,
        "scenario_hash": digest,
        "seed": seed,
        "grid": spec.as_dict(),
    }


def write_json(path, payload):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(payload, handle, cls=NumpyJSONEncoder, indent=2, sort_keys=True)
        handle.write("\n")
    log.debug("Wrote report %s", path)


def write_csv(path, fieldnames, rows, meta=None):
    """CSV table; ``meta`` goes first as a single ``# {json}`` comment line."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        if meta is not None:
            handle.write(CSV_COMMENT + json.dumps(meta, cls=NumpyJSONEncoder, sort_keys=True) + "\n")
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    log.debug("Wrote %d rows to %s", len(rows), path)


def read_csv(path):
    """
    Read a table written by :func:`write_csv`.

    Returns:
        tuple: ``(provenance or None, list of row dicts)``.
    """
    with pathlib.Path(path).open(newline="", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    meta = None
    if lines and lines[0].startswith(CSV_COMMENT):
        meta = json.loads(lines.pop(0)[len(CSV_COMMENT):])
    return meta, list(csv.DictReader(lines))


def energy_report(result, meta):
    report = dict(result.summary())
    report["provenance"] = meta
    report["created"] = datetime_to_string(get_timestamp())
    return report


def _safe(label, func, *args, **kwargs):
    """Run one diagnostic; out-of-grid windows are reported, not fatal."""
    try:
        return func(*args, **kwargs)
    except (DiagnosticsError, GridError) as exc:
        log.info("Skipping %s: %s", label, exc)
        return None


def diagnostic_report(field, meta, options, center=None):
    """
    Run the diagnostics on one field; ``options`` selects the Weiss, lambda
    and strata sections and the radii.

    Returns:
        tuple: ``(report dict, WeissProfile or None)``.
    """
    grid = field.grid
    radii = options.radii
    center = tuple(center) if center is not None else (0.0,) * grid.n
    mask = ThinMask.from_field(field)
    classifier = ClassifierConfig()
    free_boundary = annotate_free_boundary(field, extract_free_boundary(mask), max(radii), classifier)
    report = {
        "provenance": meta,
        "created": datetime_to_string(get_timestamp()),
        "energy": eval_J_local(field, Everywhere()).as_dict(),
        "free_boundary": {
            "count": len(free_boundary),
            "empty": free_boundary.empty,
            "points": free_boundary.points,
            "per_point": _point_rows(free_boundary, grid.n, classifier),
        },
    }
    profile = None
    if options.weiss:
        profile = _safe("Weiss profile", weiss_profile, field, center, radii)
        report["weiss"] = profile.as_dict() if profile is not None else None

    psi = _safe("density estimate", estimate_psi0, field, center)
    classification = _safe("classification", classify_point, field, center, classifier)
    report["origin"] = {
        "point": center,
        "psi0": None if psi is None else psi[0],
        "class": None if classification is None else classification.value,
        "homogeneity_deviation": _safe("homogeneity", homogeneity_deviation, field, center),
    }

    if options.lambda_:
        report["lambda"] = {
            "growth": _safe("lambda growth", lambda_growth, field, center, radii),
            "nodal_total": float(nodal_lambda(field).sum()),
        }
    holder = holder_report(field)
    nondegeneracy = nondegeneracy_report(field)
    report["growth"] = {
        "holder_constant": holder.constant,
        "nondegeneracy_constant": nondegeneracy.constant,
    }
    if not free_boundary.empty:
        point = center if any(np.allclose(center, p) for p in free_boundary.points) else free_boundary.points[0]
        r = max(radii)
        report["geometry"] = {
            "perimeter": _safe("perimeter", perimeter_estimate, mask, center, r),
            "corkscrew": _safe("corkscrew", lambda: _corkscrew_dict(mask, point, r)),
        }
    if options.strata:
        report["strata"] = strata_rows(field, free_boundary)
    return report, profile


def _point_rows(free_boundary, n, classifier):
    rows = []
    for node, point in zip(free_boundary.nodes, free_boundary.points):
        psi = free_boundary.psi0.get(node)
        rows.append({
            "point": point,
            "flatness": free_boundary.flatness.get(node),
            "psi0": psi,
            "class": None if psi is None else density_label(psi, n, classifier).value,
        })
    return rows


def _corkscrew_dict(mask, point, r):
    check = corkscrew_check(mask, point, r)
    return {
        "interior": check.interior,
        "interior_witness": check.interior_witness,
        "exterior": check.exterior,
        "exterior_witness": check.exterior_witness,
    }


def strata_rows(field, free_boundary, epsilon=STRATA_EPSILON):
    """Strata membership of every free boundary node for ``k = 0 .. n-1``."""
    grid = field.grid
    rows = []
    for point in free_boundary.points:
        for k in range(grid.n):
            query = StrataQuery(k, epsilon, 4.0 * grid.h, point)
            result = _safe("strata query", strata_membership, field, query)
            if result is None:
                continue
            member, scale_log = result
            rows.append({
                "point": " ".join("{:.6g}".format(c) for c in point),
                "k": k,
                "member": int(member),
                "min_distance": min(d for _, d in scale_log),
            })
    log.debug("Strata table for %d free boundary points", len(free_boundary))
    return rows


def beta_rows(field, free_boundary, radii, k):
    """``beta_2^k`` of the free boundary point measure around each node."""
    if free_boundary.empty:
        return []
    mu = slab_measure(field, free_boundary.nodes)
    rows = []
    for point in free_boundary.points:
        for r in radii:
            report = beta2(mu, point, r, k)
            rows.append({
                "point": " ".join("{:.6g}".format(c) for c in point),
                "r": r,
                "k": k,
                "beta_sq": report.beta_sq,
                "mass": report.mass,
            })
    return rows
