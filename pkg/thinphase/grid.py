"""
Half-space tensor grids, node fields and the weighted operator
``div(|y|^beta grad u)``.

Only the upper half space ``y >= 0`` is stored. Every field is even in
``y``; integrals over the full space are twice the stored-half sums. The
discretisation is a finite-volume one: each node owns a dual cell, each
grid edge carries a conductance ``K = (weighted face area) / h``. Face
weights use the exact integral of ``|t|^beta`` across the face extent,
never point samples at ``y = 0``.
"""
import enum
import itertools
import logging

import attr
import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import cg
from scipy.special import gamma

from .exceptions import ConvergenceError, GridError

# Module-level logger
log = logging.getLogger(__name__)

ALPHA_MIN = 0.05
ALPHA_MAX = 0.95
MAX_THIN_DIMENSION = 3
CG_TOLERANCE = 1e-10
CG_MAX_ITERATIONS = 100000


def weight_integral(a, b, beta):
    """Exact ``integral_a^b t^beta dt`` for ``0 <= a <= b``, vectorised."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (b ** (1.0 + beta) - a ** (1.0 + beta)) / (1.0 + beta)


def weighted_ball_volume(n, beta, r):
    """Closed form of ``integral_{B_r} |y|^beta dx`` for a ball in R^{n+1}
    centred on the thin space."""
    sphere = 2.0 * np.pi ** (n / 2.0) * gamma((beta + 1.0) / 2.0) / gamma((n + 1.0 + beta) / 2.0)
    return sphere * r ** (n + 1.0 + beta) / (n + 1.0 + beta)


def unit_ball_volume(n):
    """Lebesgue measure ``omega_n`` of the unit ball of R^n."""
    return np.pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)


def _positive_int(value):
    return int(value)


@attr.s(frozen=True)
class GridSpec(object):
    """Box ``[-R, R]^n x [0, R]`` sampled with mesh width ``h``."""
    n = attr.ib(converter=_positive_int)
    alpha = attr.ib(converter=float)
    half_extent = attr.ib(converter=float)
    spacing = attr.ib(converter=float)

    def __attrs_post_init__(self):
        if not 1 <= self.n <= MAX_THIN_DIMENSION:
            raise GridError("Thin dimension must be between 1 and {}, got {}".format(MAX_THIN_DIMENSION, self.n))
        if not ALPHA_MIN <= self.alpha <= ALPHA_MAX:
            raise GridError("alpha must lie in [{}, {}], got {}".format(ALPHA_MIN, ALPHA_MAX, self.alpha))
        if self.spacing <= 0 or self.half_extent <= 0:
            raise GridError("Spacing and half extent must be positive")
        ratio = self.half_extent / self.spacing
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise GridError(
                "Spacing {} does not divide half extent {}".format(self.spacing, self.half_extent)
            )

    @property
    def beta(self):
        return 1.0 - 2.0 * self.alpha

    @property
    def steps(self):
        return int(round(self.half_extent / self.spacing))

    @property
    def thin_count(self):
        return 2 * self.steps + 1

    @property
    def vertical_count(self):
        return self.steps + 1

    @property
    def counts(self):
        return (self.thin_count,) * self.n + (self.vertical_count,)

    def as_dict(self):
        return {
            "n": self.n,
            "alpha": self.alpha,
            "half_extent": self.half_extent,
            "spacing": self.spacing,
            "counts": list(self.counts),
        }


class Grid(object):
    """
    A built grid: node coordinates, dual cell weights, face weights and
    edge conductances for a :class:`GridSpec`. Instances are treated as
    immutable.
    """

    def __init__(self, spec):
        self.spec = spec
        self.n = spec.n
        self.h = spec.spacing
        self.beta = spec.beta
        self.shape = spec.counts
        self.ndim = spec.n + 1
        h, R, beta = self.h, spec.half_extent, spec.beta

        steps = spec.steps
        self.thin_coords = h * np.arange(-steps, steps + 1, dtype=float)
        self.y_coords = h * np.arange(0, steps + 1, dtype=float)

        # dual cells: width h, halved on the box faces
        widths = np.full(spec.thin_count, h)
        widths[0] = widths[-1] = h / 2.0
        self.thin_widths = widths

        y_lo = np.clip(self.y_coords - h / 2.0, 0.0, R)
        y_hi = np.clip(self.y_coords + h / 2.0, 0.0, R)
        self.y_dual_length = y_hi - y_lo
        self.y_cell = weight_integral(y_lo, y_hi, beta)
        # average of |t|^beta over the vertical extent of a thin-direction face
        self.thin_face_weight = self.y_cell / self.y_dual_length
        # average of |t|^beta between consecutive rows
        self.y_face_weight = weight_integral(self.y_coords[:-1], self.y_coords[1:], beta) / h

        self.cell_weights = self._outer(self.y_cell)
        self.conductances = self._build_conductances()
        self.boundary = self._build_boundary()
        self._laplacian = None
        self._diagonal = None

    def __repr__(self):
        return "Grid({!r})".format(self.spec)

    # -- geometry ---------------------------------------------------------

    def _axis_shape(self, axis, length):
        shape = [1] * self.ndim
        shape[axis] = length
        return shape

    def _outer(self, y_values, skip_axis=None):
        """Product of thin dual widths (except ``skip_axis``) and a vertical profile."""
        out = np.asarray(y_values, dtype=float).reshape(self._axis_shape(self.n, len(y_values)))
        for axis in range(self.n):
            if axis == skip_axis:
                continue
            out = out * self.thin_widths.reshape(self._axis_shape(axis, len(self.thin_widths)))
        return out

    def coordinates(self, edge_axis=None):
        """
        Broadcastable coordinate arrays ``[x_1, ..., x_n, y]`` of the nodes,
        or of the midpoints of the edges along ``edge_axis``.
        """
        coords = []
        for axis in range(self.ndim):
            values = self.thin_coords if axis < self.n else self.y_coords
            if axis == edge_axis:
                values = 0.5 * (values[:-1] + values[1:])
            coords.append(values.reshape(self._axis_shape(axis, len(values))))
        return coords

    def points(self):
        """All node coordinates as an array of shape ``shape + (n+1,)``."""
        mesh = np.meshgrid(self.thin_coords, *([self.thin_coords] * (self.n - 1)), self.y_coords, indexing="ij")
        return np.stack(mesh, axis=-1)

    def slab_coordinates(self):
        """Thin coordinates of the y = 0 slab nodes, shape ``(N,)*n + (n,)``."""
        mesh = np.meshgrid(*([self.thin_coords] * self.n), indexing="ij")
        return np.stack(mesh, axis=-1)

    def thin_index(self, point):
        """Slab index of a thin point that must coincide with a node."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = np.rint((point + self.spec.half_extent) / self.h).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.spec.thin_count) or not np.allclose(self.thin_coords[idx], point, atol=1e-9):
            raise GridError("Point {} is not a slab node".format(point.tolist()))
        return tuple(int(i) for i in idx)

    def slab_free(self):
        """Slab nodes that are not on the outer boundary ring."""
        free = np.ones((self.spec.thin_count,) * self.n, dtype=bool)
        for axis in range(self.n):
            index = [slice(None)] * self.n
            index[axis] = 0
            free[tuple(index)] = False
            index[axis] = -1
            free[tuple(index)] = False
        return free

    def _build_boundary(self):
        boundary = np.zeros(self.shape, dtype=bool)
        for axis in range(self.n):
            index = [slice(None)] * self.ndim
            index[axis] = 0
            boundary[tuple(index)] = True
            index[axis] = -1
            boundary[tuple(index)] = True
        boundary[..., -1] = True
        return boundary

    def check_ball(self, center, radius):
        """Raise :class:`GridError` unless ``B_radius(center)`` fits in the box."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if center.shape != (self.n,):
            raise GridError("Ball center must have {} thin coordinates".format(self.n))
        R = self.spec.half_extent
        slack = 1e-9 * max(1.0, R)
        if radius <= 0 or radius > R + slack or np.any(np.abs(center) + radius > R + slack):
            raise GridError("Ball of radius {} at {} exits the grid".format(radius, center.tolist()))

    # -- weighted calculus -------------------------------------------------

    def _build_conductances(self):
        conductances = []
        for axis in range(self.n):
            K = self._outer(self.thin_face_weight * self.y_dual_length, skip_axis=axis) / self.h
            shape = list(K.shape)
            shape[axis] = self.spec.thin_count - 1
            conductances.append(np.broadcast_to(K, shape).copy())
        K = self._outer(self.y_face_weight) / self.h
        conductances.append(np.broadcast_to(K, self.shape[:-1] + (self.shape[-1] - 1,)).copy())
        return conductances

    def _edge_slices(self, axis):
        lo = [slice(None)] * self.ndim
        hi = [slice(None)] * self.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        return tuple(lo), tuple(hi)

    def flux_sum(self, values):
        """Net weighted flux into every node, ``sum_e K_e (u_nb - u)``."""
        values = np.asarray(values, dtype=float)
        out = np.zeros(self.shape)
        for axis, K in enumerate(self.conductances):
            lo, hi = self._edge_slices(axis)
            flux = K * np.diff(values, axis=axis)
            out[lo] += flux
            out[hi] -= flux
        return out

    def edge_means(self, values, axis):
        """Mean of the two endpoint values on every edge along ``axis``."""
        lo, hi = self._edge_slices(axis)
        values = np.asarray(values, dtype=float)
        return 0.5 * (values[lo] + values[hi])

    def edge_energies(self, values):
        """Per-edge ``K_e (u_a - u_b)^2`` on the stored half, one array per axis."""
        values = np.asarray(values, dtype=float)
        return [K * np.diff(values, axis=axis) ** 2 for axis, K in enumerate(self.conductances)]

    @property
    def laplacian(self):
        """Sparse symmetric positive semidefinite matrix with ``L u = -flux_sum(u)``."""
        if self._laplacian is None:
            index = np.arange(int(np.prod(self.shape))).reshape(self.shape)
            rows, cols, data = [], [], []
            for axis, K in enumerate(self.conductances):
                lo, hi = self._edge_slices(axis)
                a = index[lo].ravel()
                b = index[hi].ravel()
                k = K.ravel()
                rows.extend([a, b, a, b])
                cols.extend([a, b, b, a])
                data.extend([k, k, -k, -k])
            size = index.size
            self._laplacian = sparse.csr_matrix(
                (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                shape=(size, size),
            )
            self._diagonal = self._laplacian.diagonal().reshape(self.shape)
        return self._laplacian

    @property
    def diagonal(self):
        """Sum of edge conductances at every node."""
        self.laplacian
        return self._diagonal

    def sphere_integral(self, values, center, radius):
        """Full-space ``integral_{dB_r} |y|^beta g dH^n`` from nodal values ``g``."""
        weights = Ball(center, radius).shell_weights(self)
        return 2.0 * float(np.sum(self.cell_weights * weights * values))


def build_grid(spec):
    """Build the grid for ``spec``; see :class:`Grid`."""
    log.debug("Building grid for %r", spec)
    return Grid(spec)


# -- regions -------------------------------------------------------------


@attr.s(frozen=True)
class Ball(object):
    """
    Ball centred on the thin space. Membership weights ramp linearly from 1
    to 0 across ``|x - x0| = r +- h/2``; sphere weights are a tent profile
    of half-width ``h`` normalised to unit mass in ``r``.
    """
    center = attr.ib(converter=lambda c: tuple(float(v) for v in np.atleast_1d(c)))
    radius = attr.ib(converter=float)

    def distance(self, grid, edge_axis=None):
        coords = grid.coordinates(edge_axis)
        dist2 = coords[-1] ** 2
        for axis in range(grid.n):
            dist2 = dist2 + (coords[axis] - self.center[axis]) ** 2
        return np.sqrt(dist2)

    def check(self, grid):
        grid.check_ball(self.center, self.radius)

    def weights(self, grid, edge_axis=None):
        dist = self.distance(grid, edge_axis)
        return np.clip((self.radius - dist) / grid.h + 0.5, 0.0, 1.0)

    def thin_weights(self, grid, points):
        """Ramp weights for thin points of shape ``(..., n)``."""
        dist = np.sqrt(np.sum((points - np.asarray(self.center)) ** 2, axis=-1))
        return np.clip((self.radius - dist) / grid.h + 0.5, 0.0, 1.0)

    def shell_weights(self, grid):
        dist = self.distance(grid)
        return np.maximum(0.0, 1.0 - np.abs(dist - self.radius) / grid.h) / grid.h


@attr.s(frozen=True)
class Box(object):
    """Hard half-open box ``lower <= x < upper`` over all ``n+1`` axes."""
    lower = attr.ib(converter=lambda c: tuple(float(v) for v in c))
    upper = attr.ib(converter=lambda c: tuple(float(v) for v in c))

    def check(self, grid):
        if len(self.lower) != grid.ndim or len(self.upper) != grid.ndim:
            raise GridError("Box bounds need {} coordinates".format(grid.ndim))

    def weights(self, grid, edge_axis=None):
        coords = grid.coordinates(edge_axis)
        inside = np.ones([1] * grid.ndim, dtype=bool)
        for axis, c in enumerate(coords):
            inside = inside & (c >= self.lower[axis]) & (c < self.upper[axis])
        return inside.astype(float)

    def thin_weights(self, grid, points):
        inside = np.ones(points.shape[:-1], dtype=bool)
        for axis in range(grid.n):
            inside &= (points[..., axis] >= self.lower[axis]) & (points[..., axis] < self.upper[axis])
        inside &= (0.0 >= self.lower[-1]) & (0.0 < self.upper[-1])
        return inside.astype(float)


class Everywhere(object):
    """The whole grid."""

    def check(self, grid):
        pass

    def weights(self, grid, edge_axis=None):
        return np.ones([1] * grid.ndim)

    def thin_weights(self, grid, points):
        return np.ones(points.shape[:-1])


# -- fields ---------------------------------------------------------------


def _as_values(grid, values):
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError("Field shape {} does not match grid {}".format(values.shape, grid.shape))
    return values


@attr.s(frozen=True, eq=False)
class ScalarField(object):
    """Node values on the stored upper half of ``grid``; even in ``y``."""
    grid = attr.ib()
    values = attr.ib()

    def __attrs_post_init__(self):
        values = _as_values(self.grid, self.values)
        if not np.all(np.isfinite(values)):
            raise ValueError("Field values must be finite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def spec(self):
        return self.grid.spec

    @property
    def slab(self):
        """Trace on ``y = 0``."""
        return self.values[..., 0]

    def interpolate(self, points):
        """
        Multilinear interpolation at points of shape ``(..., n+1)``; the last
        coordinate is reflected (even symmetry).
        """
        points = np.asarray(points, dtype=float)
        axes = [self.grid.thin_coords] * self.grid.n + [self.grid.y_coords]
        interpolator = RegularGridInterpolator(axes, self.values, method="linear", bounds_error=False, fill_value=None)
        query = points.reshape(-1, self.grid.ndim).copy()
        query[:, -1] = np.abs(query[:, -1])
        return interpolator(query).reshape(points.shape[:-1])

    def gradient(self):
        """Nodal gradient, one array per axis; the y-derivative vanishes on the slab."""
        grads = list(np.gradient(self.values, self.grid.h, edge_order=1))
        grads[-1] = grads[-1].copy()
        grads[-1][..., 0] = 0.0
        return grads

    def is_nonnegative(self):
        return bool(np.all(self.values >= 0.0))


class Phase(enum.IntEnum):
    ZERO = 0
    POSITIVE = 1


@attr.s(frozen=True, eq=False)
class ThinMask(object):
    """POSITIVE / ZERO labels of the slab nodes (``True`` means POSITIVE)."""
    grid = attr.ib()
    states = attr.ib()

    def __attrs_post_init__(self):
        states = np.asarray(self.states, dtype=bool)
        expected = (self.grid.spec.thin_count,) * self.grid.n
        if states.shape != expected:
            raise ValueError("Mask shape {} does not match slab {}".format(states.shape, expected))
        states = states.copy()
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @classmethod
    def all_positive(cls, grid):
        return cls(grid, np.ones((grid.spec.thin_count,) * grid.n, dtype=bool))

    @classmethod
    def all_zero(cls, grid):
        return cls(grid, np.zeros((grid.spec.thin_count,) * grid.n, dtype=bool))

    @classmethod
    def from_field(cls, field):
        return cls(field.grid, field.slab > 0.0)

    @classmethod
    def half_space(cls, grid, direction):
        """ZERO on ``{x . direction <= 0}``."""
        direction = np.asarray(direction, dtype=float)
        return cls(grid, grid.slab_coordinates() @ direction > 1e-12 * grid.h)

    @property
    def zero(self):
        return ~self.states

    def phase(self, index):
        return Phase.POSITIVE if self.states[index] else Phase.ZERO

    def key(self):
        """Tie-break key: the label vector with ZERO < POSITIVE, in C order."""
        return tuple(int(s) for s in self.states.ravel())

    def zero_nodes_full(self):
        """ZERO labels lifted to a full-grid boolean array (slab row only)."""
        full = np.zeros(self.grid.shape, dtype=bool)
        full[..., 0] = ~self.states
        return full

    def consistent_with(self, field):
        return bool(np.all(field.slab[self.zero] == 0.0))


@attr.s(frozen=True, eq=False)
class WeightedMeasure(object):
    """The measure ``|y|^beta dx`` sampled on dual cells."""
    grid = attr.ib()

    @property
    def spec(self):
        return self.grid.spec

    @property
    def cell_weights(self):
        return self.grid.cell_weights

    def ball_total(self, center, radius):
        """Full-space weighted volume of ``B_radius(center)``."""
        ball = Ball(center, radius)
        ball.check(self.grid)
        return 2.0 * float(np.sum(self.grid.cell_weights * ball.weights(self.grid)))

    def ball_exact(self, radius):
        return float(weighted_ball_volume(self.grid.n, self.grid.beta, radius))


# -- operations -----------------------------------------------------------


def apply_L(field):
    """
    Discrete ``div(|y|^beta grad u)``: net weighted flux into each node,
    zero on the outer box boundary. On the slab the reflected ghost row
    doubles the vertical flux relative to the stored half cell, which is
    what the stored-half conductance already encodes.
    """
    flux = field.grid.flux_sum(field.values)
    flux[field.grid.boundary] = 0.0
    return ScalarField(field.grid, flux)


def scaled_residual(field):
    """``apply_L`` divided by the node's total conductance (Jacobi scaling)."""
    grid = field.grid
    flux = grid.flux_sum(field.values)
    out = np.zeros(grid.shape)
    interior = ~grid.boundary
    out[interior] = flux[interior] / grid.diagonal[interior]
    return ScalarField(grid, out)


def dirichlet_solve(grid, zero_set, boundary, tol=CG_TOLERANCE, maxiter=CG_MAX_ITERATIONS):
    """
    Solve ``apply_L(u) = 0`` on free nodes with ``u = 0`` on the ZERO slab
    nodes of ``zero_set`` and ``u = boundary`` on the outer box boundary.

    Args:
        grid (Grid): the grid.
        zero_set (ThinMask or None): labels; boundary-ring labels are ignored.
        boundary (ScalarField or array): values read on boundary nodes only.
        tol (float): relative residual of the conjugate gradient iteration.
        maxiter (int): iteration cap.

    Returns:
        ScalarField: the discrete solution.

    Raises:
        ConvergenceError: when the cap is reached (carries the residual).
    """
    values = boundary.values if isinstance(boundary, ScalarField) else _as_values(grid, boundary)
    trace = values[grid.boundary]
    if not np.all(np.isfinite(trace)) or np.any(trace < 0.0):
        raise GridError("Boundary values must be finite and nonnegative")

    u0 = np.where(grid.boundary, values, 0.0)
    fixed = grid.boundary.copy()
    if zero_set is not None:
        fixed |= zero_set.zero_nodes_full()
    free = ~fixed.ravel()
    if not free.any():
        return ScalarField(grid, u0)

    L = grid.laplacian
    rhs = -(L @ u0.ravel())[free]
    A = L[free][:, free]
    preconditioner = sparse.diags(1.0 / A.diagonal())
    iterations = [0]

    def _count(_):
        iterations[0] += 1

    x, info = cg(A, rhs, rtol=tol, atol=0.0, maxiter=maxiter, M=preconditioner, callback=_count)
    if info != 0:
        bnorm = np.linalg.norm(rhs)
        residual = float(np.linalg.norm(rhs - A @ x) / (bnorm if bnorm > 0 else 1.0))
        log.warning("Conjugate gradient stopped after %d iterations, residual %.3e", iterations[0], residual)
        raise ConvergenceError(
            "Dirichlet solve did not converge within {} iterations".format(maxiter),
            residual=residual,
        )
    log.debug("Dirichlet solve converged in %d iterations", iterations[0])
    solution = u0.ravel().copy()
    solution[free] = x
    return ScalarField(grid, solution.reshape(grid.shape))


def weighted_ball_mean(field, center, r):
    """``sum w u / sum w`` over ``B_r(center)`` with ``w = |y|^beta`` cell weights."""
    grid = field.grid
    ball = Ball(center, r)
    ball.check(grid)
    w = grid.cell_weights * ball.weights(grid)
    return float(np.sum(w * field.values) / np.sum(w))


def dirichlet_energy(field, region):
    """Full-space ``integral_region |y|^beta |grad u|^2`` by edge quadrature."""
    grid = field.grid
    total = 0.0
    for axis, energy in enumerate(grid.edge_energies(field.values)):
        total += float(np.sum(energy * region.weights(grid, edge_axis=axis)))
    return 2.0 * total


def weighted_l2(field_values, grid, weights):
    """Full-space ``integral |y|^beta g^2 * weights`` from nodal values ``g``."""
    return 2.0 * float(np.sum(grid.cell_weights * weights * np.asarray(field_values) ** 2))


def caccioppoli_check(field, center, r):
    """
    Both sides of the Caccioppoli inequality on ``B = B_r(center)``:
    ``lhs = integral_{B/2} |y|^beta |grad u|^2`` and
    ``rhs = 4/r^2 integral_{B minus B/2} |y|^beta u^2``.
    """
    grid = field.grid
    outer = Ball(center, r)
    outer.check(grid)
    inner = Ball(center, r / 2.0)
    lhs = dirichlet_energy(field, inner)
    annulus = outer.weights(grid) - inner.weights(grid)
    rhs = 4.0 / r ** 2 * weighted_l2(field.values, grid, annulus)
    return lhs, rhs


def positive_cells(grid, slab_values):
    """
    Primal slab cells on which the multilinear interpolant of the trace is
    positive somewhere, i.e. cells with at least one positive corner.

    Returns:
        tuple: ``(positive, centers)`` of shapes ``(N-1,)*n`` and ``(N-1,)*n + (n,)``.
    """
    positive_nodes = np.asarray(slab_values) > 0.0
    cells = np.zeros((grid.spec.thin_count - 1,) * grid.n, dtype=bool)
    for corner in itertools.product((0, 1), repeat=grid.n):
        index = tuple(slice(c, c + grid.spec.thin_count - 1) for c in corner)
        cells |= positive_nodes[index]
    mids = 0.5 * (grid.thin_coords[:-1] + grid.thin_coords[1:])
    centers = np.stack(np.meshgrid(*([mids] * grid.n), indexing="ij"), axis=-1)
    return cells, centers
