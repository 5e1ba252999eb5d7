"""
Instrumentation for free boundary regularity: blow-ups, the measure
``lambda``, free boundary extraction, flatness, density classification,
geometric estimates and the logarithmic cut-off competitor.
"""
import enum
import itertools
import logging

import attr
import numpy as np
from scipy import ndimage

from .common import make_rng
from .energy import annulus_deficit, weiss_density
from .exceptions import DiagnosticsError, GridError
from .extension import trace_limit_map
from .grid import (
    Ball, GridSpec, ScalarField, ThinMask, build_grid, unit_ball_volume
)

# Module-level logger
log = logging.getLogger(__name__)

DEFAULT_BLOWUP_RADII = (0.5, 0.4, 0.3, 0.25)
RANDOM_DIRECTIONS = 64
HOMOGENEITY_ANNULUS = (0.2, 0.8)


def _as_mask(obj):
    """Accept a SolveResult, ThinMask or ScalarField and return its mask."""
    if isinstance(obj, ThinMask):
        return obj
    if isinstance(obj, ScalarField):
        return ThinMask.from_field(obj)
    return obj.mask


def _as_field(obj):
    return obj if isinstance(obj, ScalarField) else obj.field


# -- blow-ups -------------------------------------------------------------


def rescale_blowup(field, center, rho, target_spec=None):
    """
    ``u_rho(z) = u(x0 + rho z) / rho^alpha`` sampled on a grid of half extent
    one. The default target spacing is ``h / rho`` so that target nodes fall
    on source nodes when ``rho / h`` is an integer.
    """
    grid = field.grid
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if target_spec is None:
        steps = max(2, int(round(rho / grid.h)))
        target_spec = GridSpec(grid.n, grid.spec.alpha, 1.0, 1.0 / steps)
    R = grid.spec.half_extent
    reach = rho * target_spec.half_extent
    if reach > R + 1e-9 or np.any(np.abs(center) + reach > R + 1e-9):
        raise DiagnosticsError("Blow-up window of radius {} at {} exits the grid".format(reach, center.tolist()))
    target = build_grid(target_spec)
    points = target.points()
    points[..., :grid.n] = center + rho * points[..., :grid.n]
    points[..., -1] = rho * points[..., -1]
    values = field.interpolate(points) / rho ** grid.spec.alpha
    return ScalarField(target, np.maximum(values, 0.0))


def homogeneity_deviation(field, center, annulus=HOMOGENEITY_ANNULUS):
    """Deficit integral of the field about ``center`` over ``B_0.8 - B_0.2``."""
    inner, outer = annulus
    try:
        return annulus_deficit(field, tuple(np.atleast_1d(center)), inner, outer)
    except GridError as exc:
        raise DiagnosticsError("Homogeneity annulus exits the grid", root_exception=exc)


# -- the measure lambda ---------------------------------------------------


@attr.s(frozen=True, eq=False)
class LambdaDensity(object):
    """Slab density ``2 lim |y|^beta u_y`` (zero on the boundary ring)."""
    grid = attr.ib()
    density = attr.ib()

    def total(self, center, r):
        """Ball mass by slab quadrature of the density."""
        self.grid.check_ball(center, r)
        points = self.grid.slab_coordinates()
        weights = Ball(center, r).thin_weights(self.grid, points)
        volume = np.ones_like(self.density)
        for axis in range(self.grid.n):
            shape = [1] * self.grid.n
            shape[axis] = -1
            volume = volume * self.grid.thin_widths.reshape(shape)
        return float(np.sum(weights * volume * self.density))

    @property
    def minimum(self):
        return float(self.density[self.grid.slab_free()].min())

    def positive_phase_max(self, mask, clearance=0.0):
        """Largest ``|density|`` on POSITIVE nodes at least ``clearance`` from the ZERO phase."""
        keep = mask.states & self.grid.slab_free()
        if clearance > 0.0 and mask.zero.any():
            distance = ndimage.distance_transform_edt(mask.states, sampling=self.grid.h)
            keep &= distance >= clearance
        if not keep.any():
            return 0.0
        return float(np.abs(self.density[keep]).max())


def lambda_density(field):
    return LambdaDensity(field.grid, 2.0 * trace_limit_map(field))


def lambda_ball(field, center, r):
    """``lambda(B_r)`` as the weighted outward flux through ``dB_r``."""
    grid = field.grid
    ball = Ball(center, r)
    ball.check(grid)
    coords = grid.coordinates()
    grads = field.gradient()
    offsets = [coords[axis] - ball.center[axis] for axis in range(grid.n)] + [coords[-1]]
    dist = np.broadcast_to(np.sqrt(sum(o ** 2 for o in offsets)), grid.shape)
    radial = sum(offsets[axis] * grads[axis] for axis in range(grid.ndim))
    normal = np.zeros(grid.shape)
    nonzero = dist > 0.0
    normal[nonzero] = radial[nonzero] / dist[nonzero]
    return grid.sphere_integral(normal, ball.center, r)


def nodal_lambda(field):
    """Discrete measure: twice the net flux into each slab node, zero on the ring."""
    grid = field.grid
    flux = 2.0 * grid.flux_sum(field.values)[..., 0]
    return np.where(grid.slab_free(), flux, 0.0)


def lambda_growth(field, center, radii):
    """Rows ``(r, lambda(B_r), lambda(B_r) / r^{n - alpha})``."""
    n, alpha = field.grid.n, field.grid.spec.alpha
    rows = []
    for r in radii:
        mass = lambda_ball(field, center, r)
        rows.append((float(r), mass, mass / r ** (n - alpha)))
    return rows


# -- free boundary --------------------------------------------------------


@attr.s(frozen=True)
class FreeBoundary(object):
    nodes = attr.ib(converter=tuple)
    points = attr.ib()
    certificates = attr.ib(converter=tuple)
    flatness = attr.ib(factory=dict)
    psi0 = attr.ib(factory=dict)

    def __len__(self):
        return len(self.nodes)

    @property
    def empty(self):
        return not self.nodes


def _neighbors(index, shape):
    for axis in range(len(shape)):
        for step in (-1, 1):
            j = index[axis] + step
            if 0 <= j < shape[axis]:
                yield index[:axis] + (j,) + index[axis + 1:]


def extract_free_boundary(result):
    """
    Slab nodes whose thin neighbours include both a POSITIVE and a ZERO node,
    each with one neighbour of either phase as certificate.
    """
    mask = _as_mask(result)
    grid = mask.grid
    states = mask.states
    nodes, certificates = [], []
    if not states.any():
        log.info("Empty positivity set; no free boundary")
    for index in np.ndindex(states.shape):
        positive = zero = None
        for nb in _neighbors(index, states.shape):
            if states[nb] and positive is None:
                positive = nb
            elif not states[nb] and zero is None:
                zero = nb
        if positive is not None and zero is not None:
            nodes.append(index)
            certificates.append((positive, zero))
    coords = grid.slab_coordinates()
    points = np.array([coords[i] for i in nodes]).reshape(-1, grid.n)
    return FreeBoundary(nodes, points, certificates)


def isolated_phases(result):
    """Slab nodes all of whose thin neighbours carry the other label."""
    states = _as_mask(result).states
    isolated = []
    for index in np.ndindex(states.shape):
        nbs = list(_neighbors(index, states.shape))
        if nbs and all(states[nb] != states[index] for nb in nbs):
            isolated.append(index)
    return isolated


def boundary_spacing_histogram(free_boundary, bins=8):
    """Histogram of gaps between consecutive free boundary points (one thin dimension)."""
    points = np.sort(np.asarray(free_boundary.points)[:, 0]) if len(free_boundary) else np.array([])
    gaps = np.diff(points)
    if gaps.size == 0:
        return np.zeros(bins, dtype=int), np.linspace(0.0, 1.0, bins + 1)
    return np.histogram(gaps, bins=bins)


def flatness_directions(n, seed=0, samples=RANDOM_DIRECTIONS):
    """Axes, diagonals and ``samples`` seeded random unit vectors, with both signs."""
    directions = [np.eye(n)[i] for i in range(n)]
    if n > 1:
        for signs in itertools.product((1.0, -1.0), repeat=n):
            directions.append(np.array(signs) / np.sqrt(n))
    rng = make_rng(seed)
    for _ in range(samples):
        v = rng.standard_normal(n)
        directions.append(v / np.linalg.norm(v))
    directions += [-d for d in directions]
    return directions


def flatness(result, center, r, seed=0, samples=RANDOM_DIRECTIONS):
    """
    Smallest ``eps`` over the sampled directions ``e`` such that, inside
    ``B_r(center)``, every ZERO node has ``(x - x0) . e <= eps r`` and every
    POSITIVE node has ``(x - x0) . e > -eps r``.

    Returns:
        tuple: ``(eps, direction)``.
    """
    mask = _as_mask(result)
    grid = mask.grid
    center = np.atleast_1d(np.asarray(center, dtype=float))
    try:
        grid.check_ball(center, r)
    except GridError as exc:
        raise DiagnosticsError("Flatness ball exits the slab", root_exception=exc)
    offsets = grid.slab_coordinates() - center
    inside = np.sum(offsets ** 2, axis=-1) <= r ** 2 * (1.0 + 1e-12)
    rel = offsets[inside] / r
    phase = mask.states[inside]
    best, best_direction = np.inf, None
    for e in flatness_directions(grid.n, seed, samples):
        s = rel @ e
        eps = 0.0
        if phase.any():
            eps = max(eps, float(np.max(-s[phase])))
        if (~phase).any():
            eps = max(eps, float(np.max(s[~phase])))
        if eps < best:
            best, best_direction = eps, e
    return best, best_direction


# -- density classification -----------------------------------------------


class Classification(enum.Enum):
    REGULAR = "REGULAR"
    SINGULAR = "SINGULAR"
    UNRESOLVED = "UNRESOLVED"


@attr.s(frozen=True)
class ClassifierConfig(object):
    density_gap = attr.ib(default=None)
    blowup_radii = attr.ib(default=DEFAULT_BLOWUP_RADII, converter=lambda radii: tuple(float(r) for r in radii))

    def __attrs_post_init__(self):
        if self.density_gap is not None and not self.density_gap > 0:
            raise DiagnosticsError("density_gap must be positive")
        if not self.blowup_radii:
            raise DiagnosticsError("At least one blow-up radius is required")

    def gap(self, n):
        if self.density_gap is not None:
            return float(self.density_gap)
        return 0.1 * unit_ball_volume(n) / 2.0


def estimate_psi0(field, point, cfg=None):
    """``Psi`` at the smallest configured radius that is at least ``4h``."""
    cfg = cfg or ClassifierConfig()
    grid = field.grid
    usable = sorted(r for r in cfg.blowup_radii if r >= 4.0 * grid.h - 1e-12)
    if not usable:
        raise DiagnosticsError("No blow-up radius reaches 4h = {}".format(4.0 * grid.h))
    radius = usable[0]
    try:
        return weiss_density(field, tuple(np.atleast_1d(point)), radius), radius
    except GridError as exc:
        raise DiagnosticsError("Blow-up radius {} exits the grid".format(radius), root_exception=exc)


def density_label(psi0, n, cfg=None):
    """
    REGULAR when the density estimate is below ``omega_n/2 + gap/2``,
    SINGULAR above ``omega_n/2 + gap``, UNRESOLVED in between.
    """
    cfg = cfg or ClassifierConfig()
    half = unit_ball_volume(n) / 2.0
    gap = cfg.gap(n)
    if psi0 < half + gap / 2.0:
        return Classification.REGULAR
    if psi0 > half + gap:
        return Classification.SINGULAR
    return Classification.UNRESOLVED


def classify_point(field, point, cfg=None):
    """:func:`density_label` of :func:`estimate_psi0` at ``point``."""
    cfg = cfg or ClassifierConfig()
    psi0, radius = estimate_psi0(field, point, cfg)
    label = density_label(psi0, field.grid.n, cfg)
    log.info("Point %s: psi %.5f at r=%g -> %s", list(np.atleast_1d(point)), psi0, radius, label.value)
    return label


def annotate_free_boundary(field, free_boundary, r, cfg=None):
    """
    Copy of ``free_boundary`` with ``flatness`` in ``B_r`` and the density
    estimate filled in per node; nodes whose windows exit the grid are left out.
    """
    mask = ThinMask.from_field(field)
    flat, psi = {}, {}
    for node, point in zip(free_boundary.nodes, free_boundary.points):
        try:
            flat[node] = flatness(mask, point, r)[0]
        except DiagnosticsError as exc:
            log.debug("No flatness at %s: %s", node, exc)
        try:
            psi[node] = estimate_psi0(field, point, cfg)[0]
        except DiagnosticsError as exc:
            log.debug("No density estimate at %s: %s", node, exc)
    return attr.evolve(free_boundary, flatness=flat, psi0=psi)


# -- geometry -------------------------------------------------------------


def perimeter_estimate(result, center, r):
    """Phase-changing thin edges inside ``B_r(center)`` times ``h^{n-1}``."""
    mask = _as_mask(result)
    grid = mask.grid
    try:
        grid.check_ball(center, r)
    except GridError as exc:
        raise DiagnosticsError("Perimeter ball exits the slab", root_exception=exc)
    coords = grid.slab_coordinates()
    ball = Ball(center, r)
    total = 0.0
    for axis in range(grid.n):
        lo = [slice(None)] * grid.n
        hi = [slice(None)] * grid.n
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        change = mask.states[tuple(lo)] != mask.states[tuple(hi)]
        mids = 0.5 * (coords[tuple(lo)] + coords[tuple(hi)])
        total += float(np.sum(ball.thin_weights(grid, mids)[change]))
    return total * grid.h ** (grid.n - 1)


@attr.s(frozen=True)
class CorkscrewReport(object):
    interior = attr.ib()
    interior_witness = attr.ib()
    exterior = attr.ib()
    exterior_witness = attr.ib()

    @property
    def interior_found(self):
        return self.interior > 0.0

    @property
    def exterior_found(self):
        return self.exterior > 0.0


def _corkscrew_phase(grid, phase, other_present, center, r, inside, dist_center):
    if not phase[inside].any():
        return 0.0, None
    if other_present:
        clearance = ndimage.distance_transform_edt(phase, sampling=grid.h) - grid.h
    else:
        clearance = np.full(phase.shape, np.inf)
    radius = np.minimum(clearance, r - dist_center)
    radius = np.where(phase & inside, radius, -np.inf)
    best = np.unravel_index(int(np.argmax(radius)), radius.shape)
    value = float(radius[best])
    if value <= 0.0:
        return 0.0, None
    return value / r, tuple(grid.slab_coordinates()[best])


def corkscrew_check(result, point, r):
    """
    Largest ``c`` such that a slab ball of radius ``c r`` inside
    ``B_r(point)`` lies in the POSITIVE phase (interior) and in the ZERO
    phase (exterior), with the witness centres.
    """
    mask = _as_mask(result)
    grid = mask.grid
    try:
        grid.check_ball(point, r)
    except GridError as exc:
        raise DiagnosticsError("Corkscrew ball exits the slab", root_exception=exc)
    offsets = grid.slab_coordinates() - np.atleast_1d(point)
    dist_center = np.sqrt(np.sum(offsets ** 2, axis=-1))
    inside = dist_center <= r
    states = mask.states
    interior, interior_at = _corkscrew_phase(grid, states, (~states).any(), point, r, inside, dist_center)
    exterior, exterior_at = _corkscrew_phase(grid, ~states, states.any(), point, r, inside, dist_center)
    return CorkscrewReport(interior, interior_at, exterior, exterior_at)


# -- logarithmic cut-off competitor ---------------------------------------


def log_cutoff(t, R):
    """``1`` below ``R``, ``0`` beyond ``R^2``, linear in ``ln t`` between."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        ramp = np.log(R ** 2 / t) / np.log(R)
    return np.clip(np.where(t <= R, 1.0, ramp), 0.0, 1.0)


def log_cutoff_slope(t, R):
    t = np.asarray(t, dtype=float)
    inside = (t > R) & (t < R ** 2)
    with np.errstate(divide="ignore"):
        slope = -1.0 / (t * np.log(R))
    return np.where(inside, slope, 0.0)


def competitor_log_cutoff(cone_field, R):
    """
    Energy change of the deformations ``V o Phi_s^{-1}``,
    ``Phi_s(x) = x + s psi_R(|x|) e_1`` for ``s = +-1``, against ``V``:

        delta = J(V+) + J(V-) - 2 J(V)     on B_{R^2}
        bound = 2 int |y|^beta |grad V|^2 psi'^2 / (1 - psi'^2)

    Both integrals are taken on the cone's own grid by change of
    variables; the thin-area terms cancel exactly.

    Returns:
        tuple: ``(delta, bound)``.
    """
    grid = cone_field.grid
    if grid.n != 2:
        raise DiagnosticsError("The logarithmic cut-off competitor is two dimensional")
    if R <= 1.0:
        raise DiagnosticsError("Cut-off scale R must exceed 1")
    if grid.spec.half_extent < R ** 2 - 1e-9:
        raise DiagnosticsError("Grid half extent {} is smaller than R^2 = {}".format(grid.spec.half_extent, R ** 2))

    coords = grid.coordinates()
    dist = np.broadcast_to(np.sqrt(sum(c ** 2 for c in coords)), grid.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        nu = [np.where(dist > 0.0, c / dist, 0.0) for c in coords]
    slope = log_cutoff_slope(dist, R)
    grads = cone_field.gradient()
    weights = 2.0 * grid.cell_weights * Ball((0.0, 0.0), R ** 2).weights(grid)

    def energy(sign):
        det = 1.0 + sign * slope * nu[0]
        shift = sign * slope * grads[0] / det
        total = 0.0
        for axis in range(grid.ndim):
            total = total + (grads[axis] - shift * nu[axis]) ** 2
        return float(np.sum(weights * total * det))

    delta = energy(1.0) + energy(-1.0) - 2.0 * energy(0.0)
    squared = sum(g ** 2 for g in grads)
    bound = float(np.sum(weights * squared * 2.0 * slope ** 2 / (1.0 - slope ** 2)))
    log.info("Cut-off competitor at R=%g: delta %.6g, bound %.6g", R, delta, bound)
    return delta, bound


# -- growth constants -----------------------------------------------------


@attr.s(frozen=True)
class GrowthReport(object):
    constant = attr.ib()
    rows = attr.ib(converter=tuple)

    @property
    def vacuous(self):
        return not self.rows


def _dyadic_radii(grid, point):
    R = grid.spec.half_extent
    room = min(0.5, R - float(np.max(np.abs(point))), R)
    radii = []
    r = room
    while r >= 2.0 * grid.h:
        radii.append(r)
        r /= 2.0
    return radii


def _shell_sups(field, point):
    grid = field.grid
    alpha = grid.spec.alpha
    coords = grid.coordinates()
    offsets = [coords[axis] - point[axis] for axis in range(grid.n)] + [coords[-1]]
    dist = np.broadcast_to(np.sqrt(sum(o ** 2 for o in offsets)), grid.shape)
    rows = []
    for r in _dyadic_radii(grid, point):
        shell = np.abs(dist - r) <= grid.h / 2.0
        if shell.any():
            rows.append((tuple(float(p) for p in point), r, float(field.values[shell].max()) / r ** alpha))
    return rows


def _zero_side_points(result):
    mask = _as_mask(result)
    fb = extract_free_boundary(mask)
    free = mask.grid.slab_free()
    coords = mask.grid.slab_coordinates()
    return [coords[i] for i in fb.nodes if not mask.states[i] and free[i]]


def holder_report(result):
    """Largest ``sup_{dB_r(x0)} u / r^alpha`` over ZERO-side free boundary nodes and dyadic radii."""
    field = _as_field(result)
    rows = [row for point in _zero_side_points(result) for row in _shell_sups(field, point)]
    if not rows:
        log.info("No free boundary; Holder report is vacuous")
        return GrowthReport(None, ())
    return GrowthReport(max(row[2] for row in rows), rows)


def nondegeneracy_report(result):
    """Smallest ``sup_{dB_r(x0)} u / r^alpha`` over the same points and radii."""
    field = _as_field(result)
    rows = [row for point in _zero_side_points(result) for row in _shell_sups(field, point)]
    if not rows:
        log.info("No free boundary; nondegeneracy report is vacuous")
        return GrowthReport(None, ())
    return GrowthReport(min(row[2] for row in rows), rows)
