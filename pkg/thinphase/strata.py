"""
Quantitative stratification tools: beta-numbers of point measures,
distances to k-symmetric functions, strata membership across scales and
packing sums.
"""
import itertools
import logging

import attr
import numpy as np

from .common import make_rng
from .energy import weiss_density
from .exceptions import DiagnosticsError, GridError
from .grid import Ball

# Module-level logger
log = logging.getLogger(__name__)

RAY_SAMPLES = 24
AVERAGING_SAMPLES = 5
PLANE_BATCH = 2048


def _as_array(points):
    return np.atleast_2d(np.asarray(points, dtype=float))


@attr.s(frozen=True, eq=False)
class PointMeasure(object):
    """Finite sum of weighted Dirac masses."""
    locations = attr.ib(converter=_as_array)
    masses = attr.ib(converter=lambda m: np.atleast_1d(np.asarray(m, dtype=float)))

    def __attrs_post_init__(self):
        if self.locations.shape[0] != self.masses.shape[0]:
            raise ValueError("Every atom needs exactly one mass")
        if not np.all(np.isfinite(self.masses)) or np.any(self.masses < 0.0):
            raise ValueError("Atom masses must be finite and nonnegative")

    @classmethod
    def unit(cls, locations):
        locations = _as_array(locations)
        return cls(locations, np.ones(locations.shape[0]))

    @property
    def dimension(self):
        return self.locations.shape[1]

    @property
    def total(self):
        return float(self.masses.sum())

    def restrict(self, center, radius):
        offsets = self.locations - np.asarray(center, dtype=float)
        inside = np.sum(offsets ** 2, axis=1) <= radius ** 2 * (1.0 + 1e-12)
        return self.locations[inside], self.masses[inside]


@attr.s(frozen=True, eq=False)
class BetaReport(object):
    center = attr.ib()
    radius = attr.ib()
    k = attr.ib()
    beta_sq = attr.ib()
    eigenvalues = attr.ib()
    plane_point = attr.ib()
    plane_basis = attr.ib()
    mass = attr.ib()

    def as_dict(self):
        return {
            "center": list(np.atleast_1d(self.center)),
            "radius": self.radius,
            "k": self.k,
            "beta_sq": self.beta_sq,
            "eigenvalues": list(self.eigenvalues),
            "plane_point": list(self.plane_point),
            "plane_basis": np.asarray(self.plane_basis).tolist(),
            "mass": self.mass,
        }


def plane_objective(mu, center, radius, k, point, basis):
    """``r^{-k-2} int_B dist(z, L)^2 dmu`` for the affine plane ``point + span(basis)``."""
    locations, masses = mu.restrict(center, radius)
    offsets = locations - np.asarray(point, dtype=float)
    basis = np.asarray(basis, dtype=float).reshape(-1, mu.dimension)
    if basis.size:
        offsets = offsets - (offsets @ basis.T) @ basis
    return float(np.sum(masses * np.sum(offsets ** 2, axis=1)) / radius ** (k + 2))


def beta2(mu, center, radius, k):
    """
    ``beta_2^k`` of ``mu`` on ``B_radius(center)`` from the eigenvalues of the
    centred second-moment form:
    ``beta^2 = mu(B) / r^k * (lambda_{k+1} + ... + lambda_n) / r^2``.
    """
    locations, masses = mu.restrict(center, radius)
    mass = float(masses.sum())
    if mass <= 0.0:
        raise DiagnosticsError("The measure has no mass in the ball")
    if not 0 <= k <= mu.dimension:
        raise DiagnosticsError("k must lie between 0 and {}".format(mu.dimension))
    barycenter = masses @ locations / mass
    offsets = locations - barycenter
    form = (offsets * masses[:, None]).T @ offsets / mass
    values, vectors = np.linalg.eigh(form)
    order = np.argsort(values)[::-1]
    values = np.clip(values[order], 0.0, None)
    vectors = vectors[:, order]
    beta_sq = mass / radius ** k * float(values[k:].sum()) / radius ** 2
    return BetaReport(
        center=np.asarray(center, dtype=float), radius=float(radius), k=int(k), beta_sq=beta_sq,
        eigenvalues=values, plane_point=barycenter, plane_basis=vectors[:, :k].T, mass=mass,
    )


def beta2_bruteforce(mu, center, radius, k, plane_samples, seed=0):
    """Minimum of :func:`plane_objective` over the eigen-plane and random affine k-planes."""
    report = beta2(mu, center, radius, k)
    best = plane_objective(mu, center, radius, k, report.plane_point, report.plane_basis)
    rng = make_rng(seed)
    d = mu.dimension
    center = np.asarray(center, dtype=float)
    locations, masses = mu.restrict(center, radius)
    remaining = int(plane_samples)
    while remaining > 0:
        count = min(remaining, PLANE_BATCH)
        remaining -= count
        directions = rng.standard_normal((count, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        points = center + radius * rng.uniform(size=(count, 1)) * directions
        # stacked orthonormal frames, shape (count, d, k)
        bases = np.linalg.qr(rng.standard_normal((count, d, max(k, 1))))[0][:, :, :k]
        offsets = locations[None, :, :] - points[:, None, :]
        if k:
            offsets = offsets - (offsets @ bases) @ np.swapaxes(bases, 1, 2)
        objective = np.sum(offsets ** 2, axis=2) @ masses / radius ** (k + 2)
        best = min(best, float(objective.min()))
    return best


# -- symmetry distances ---------------------------------------------------


def _homogenized(field, center, radius):
    """
    Ray-wise weighted least-squares projection onto ``a(theta) |z|^alpha``
    on ``B_radius``; returns a callable evaluating the homogeneous function
    at offsets ``w`` of shape ``(m, n+1)``.
    """
    grid = field.grid
    n, alpha, beta = grid.n, grid.spec.alpha, grid.beta
    nodes, weights = np.polynomial.legendre.leggauss(RAY_SAMPLES)
    rho = 0.5 * radius * (nodes + 1.0)
    weights = 0.5 * radius * weights
    numerator_weight = weights * rho ** (n + beta + alpha)
    denominator = float(np.sum(weights * rho ** (n + beta + 2.0 * alpha)))

    anchor = np.concatenate([np.asarray(center, dtype=float), [0.0]])

    def profile(directions):
        # a(theta) for unit directions of shape (m, n+1)
        samples = anchor + rho[None, :, None] * directions[:, None, :]
        values = field.interpolate(samples)
        return values @ numerator_weight / denominator

    def evaluate(offsets):
        offsets = np.asarray(offsets, dtype=float)
        norms = np.linalg.norm(offsets, axis=-1)
        out = np.zeros(offsets.shape[:-1])
        nonzero = norms > 0.0
        if nonzero.any():
            directions = offsets[nonzero] / norms[nonzero][:, None]
            out[nonzero] = profile(directions) * norms[nonzero] ** alpha
        return out

    return evaluate


def symmetry_frames(n, k, budget, seed=0):
    """Coordinate k-frames first, then seeded random orthonormal k-frames, ``budget`` in total."""
    frames = [np.eye(n)[list(axes)] for axes in itertools.combinations(range(n), k)]
    rng = make_rng(seed)
    while len(frames) < budget:
        frames.append(np.linalg.qr(rng.standard_normal((n, k)))[0][:, :k].T)
    return frames[:max(budget, 1)]


def ksym_distance(field, center, r, k, direction_budget=8, seed=0):
    """
    Upper bound for ``inf r^{-2-n} int_{B_r} |y|^beta |u - v|^2`` over
    k-symmetric ``v`` (alpha-homogeneous about the centre, invariant along a
    k-dimensional thin subspace). Candidates average the homogenised field
    along sampled subspaces.
    """
    grid = field.grid
    n = grid.n
    if not 0 <= k <= n:
        raise DiagnosticsError("Symmetry dimension {} is out of range for n={}".format(k, n))
    center = tuple(float(c) for c in np.atleast_1d(center))
    ball = Ball(center, r)
    try:
        ball.check(grid)
    except GridError as exc:
        raise DiagnosticsError("Symmetry ball exits the grid", root_exception=exc)
    homogeneous = _homogenized(field, center, r)

    weights = 2.0 * grid.cell_weights * ball.weights(grid)
    active = np.broadcast_to(weights, grid.shape) > 0.0
    points = grid.points()[active]
    offsets = points.copy()
    offsets[:, :n] -= np.asarray(center)
    values = field.values[active]
    w = np.broadcast_to(weights, grid.shape)[active]

    best = np.inf
    samples = np.linspace(-1.0, 1.0, AVERAGING_SAMPLES)
    frames = [np.zeros((0, n))] if k == 0 else symmetry_frames(n, k, direction_budget, seed)
    for frame in frames:
        basis = np.hstack([frame, np.zeros((frame.shape[0], 1))])
        if k == 0:
            candidate = homogeneous(offsets)
        else:
            orthogonal = offsets - (offsets @ basis.T) @ basis
            length = np.linalg.norm(orthogonal, axis=1)
            candidate = np.zeros(len(offsets))
            shifts = list(itertools.product(samples, repeat=k))
            for shift in shifts:
                moved = orthogonal + length[:, None] * (np.asarray(shift) @ basis)
                candidate += homogeneous(moved)
            candidate /= len(shifts)
        distance = float(np.sum(w * (values - candidate) ** 2)) / r ** (2 + n)
        best = min(best, distance)
    log.debug("k=%d symmetry distance at %s, r=%g: %.4e", k, center, r, best)
    return best


@attr.s(frozen=True)
class StrataQuery(object):
    k = attr.ib(converter=int)
    epsilon = attr.ib(converter=float)
    r_min = attr.ib(converter=float)
    point = attr.ib(converter=lambda p: tuple(float(c) for c in np.atleast_1d(p)))
    direction_budget = attr.ib(default=8, converter=int)
    r_max = attr.ib(default=None)

    def __attrs_post_init__(self):
        if not self.epsilon > 0:
            raise DiagnosticsError("epsilon must be positive")
        if not 0 < self.r_min <= 1:
            raise DiagnosticsError("r_min must lie in (0, 1]")
        if self.k < 0:
            raise DiagnosticsError("k must be nonnegative")

    def scales(self, grid):
        R = grid.spec.half_extent
        top = self.r_max if self.r_max is not None else min(1.0, R - max([0.0] + [abs(c) for c in self.point]))
        if top < self.r_min:
            raise DiagnosticsError("Largest scale {} is below r_min {}".format(top, self.r_min))
        scales = []
        s = top
        while s > self.r_min * (1.0 + 1e-9):
            scales.append(s)
            s /= 2.0
        scales.append(self.r_min)
        return scales


def strata_membership(field, query):
    """
    Whether ``query.point`` lies in ``S^k_{eps, r}``: the field is not
    ``(k+1, eps)``-symmetric at any sampled scale between ``r_min`` and the
    largest fitting scale.

    Returns:
        tuple: ``(member, [(scale, distance), ...])``.
    """
    grid = field.grid
    scale_log = []
    for s in query.scales(grid):
        if query.k + 1 > grid.n:
            distance = np.inf
        else:
            distance = ksym_distance(field, query.point, s, query.k + 1, query.direction_budget)
        scale_log.append((s, distance))
    member = all(d > query.epsilon for _, d in scale_log)
    log.info("Strata query k=%d eps=%g at %s: member=%s", query.k, query.epsilon, query.point, member)
    return member, scale_log


# -- packing --------------------------------------------------------------


@attr.s(frozen=True)
class PackingReport(object):
    packing = attr.ib()
    reifenberg_integral = attr.ib()
    scales = attr.ib(converter=tuple)
    integrands = attr.ib(converter=tuple)
    overlaps = attr.ib(converter=tuple)


def packing_sum(balls, k):
    """
    Packing sum ``sum r_q^k`` of disjoint balls and the dyadic,
    trapezoid-in-``ln s`` discretisation of
    ``int_0^2 int beta^k_{mu,2}(z, s)^2 dmu(z) ds/s`` for
    ``mu = sum r_q^k delta_q``. Overlapping balls are reported, not fatal.
    """
    centers = _as_array([c for c, _ in balls])
    radii = np.asarray([float(r) for _, r in balls])
    if np.any(radii <= 0.0) or np.any(radii > 1.0):
        raise DiagnosticsError("Packing radii must lie in (0, 1]")
    if np.any(np.linalg.norm(centers, axis=1) > 1.0 + 1e-12):
        raise DiagnosticsError("Packing centres must lie in the unit ball")
    overlaps = []
    for i, j in itertools.combinations(range(len(radii)), 2):
        if np.linalg.norm(centers[i] - centers[j]) < radii[i] + radii[j] - 1e-12:
            overlaps.append((i, j))
    if overlaps:
        log.warning("%d overlapping ball pairs in packing", len(overlaps))

    mu = PointMeasure(centers, radii ** k)
    levels = int(np.ceil(np.log2(2.0 / radii.min())))
    scales = [2.0 * 2.0 ** -j for j in range(levels + 1)]
    integrands = []
    for s in scales:
        value = 0.0
        for z, m in zip(centers, mu.masses):
            value += m * beta2(mu, z, s, k).beta_sq
        integrands.append(value)
    step = np.log(2.0)
    if len(scales) == 1:
        integral = 0.0
    else:
        integral = step * (sum(integrands) - 0.5 * (integrands[0] + integrands[-1]))
    return PackingReport(float(np.sum(radii ** k)), float(integral), scales, integrands, overlaps)


def beta_vs_weiss_drop(field, center, r, mu, k):
    """
    ``beta^k_{mu,2}(B_r)^2`` against ``r^{-k} int (Psi_{4r} - Psi_r) dmu``
    with ``Psi`` evaluated at every atom in the ball.
    """
    report = beta2(mu, center, r, k)
    locations, masses = mu.restrict(center, r)
    drop = 0.0
    for z, m in zip(locations, masses):
        try:
            drop += m * (weiss_density(field, tuple(z), 4.0 * r) - weiss_density(field, tuple(z), r))
        except GridError as exc:
            raise DiagnosticsError("Weiss radius {} exits the grid".format(4.0 * r), root_exception=exc)
    return report.beta_sq, drop / r ** k


def slab_measure(field, nodes):
    """Unit point masses at the given slab nodes."""
    coords = field.grid.slab_coordinates()
    return PointMeasure.unit([coords[i] for i in nodes])

