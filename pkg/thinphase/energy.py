"""
The local functional (weighted Dirichlet energy plus thin positivity
measure), its nonlocal counterpart on the slab, and the Weiss-type
density with its deficit identity.
"""
import logging
import math

import attr
import numpy as np
from numpy.polynomial import Polynomial

from .exceptions import GridError
from .extension import ThinFunction, gagliardo_constant
from .grid import Ball, dirichlet_energy, positive_cells

# Module-level logger
log = logging.getLogger(__name__)


@attr.s(frozen=True)
class EnergyBreakdown(object):
    dirichlet = attr.ib(converter=float)
    thin_area = attr.ib(converter=float)
    total = attr.ib(init=False)

    def __attrs_post_init__(self):
        object.__setattr__(self, "total", self.dirichlet + self.thin_area)

    def as_dict(self):
        return {"dirichlet": self.dirichlet, "thin_area": self.thin_area, "total": self.total}


def thin_area(grid, slab_values, region):
    """Measure of the positivity set of the trace inside ``region``."""
    cells, centers = positive_cells(grid, slab_values)
    weights = region.thin_weights(grid, centers)
    return float(np.sum(weights[cells])) * grid.h ** grid.n


def eval_J_local(field, region):
    """
    ``J(u, region)``: full-space weighted Dirichlet energy plus the slab
    measure of ``{u > 0}``, both restricted to ``region``.
    """
    region.check(field.grid)
    return EnergyBreakdown(
        dirichlet=dirichlet_energy(field, region),
        thin_area=thin_area(field.grid, field.slab, region),
    )


def eval_J_nonlocal(f, region):
    """
    Nonlocal functional of thin data on a thin ball: the Gagliardo double
    sum over node pairs not both outside ``region`` (pairs closer than
    ``h/2`` dropped) plus the positivity measure inside ``region``.
    Contributions from beyond the slab are not included.
    """
    if not isinstance(f, ThinFunction):
        raise TypeError("eval_J_nonlocal expects a ThinFunction")
    grid = f.grid
    region.check(grid)
    n, alpha, h = grid.n, grid.spec.alpha, grid.h

    points = grid.slab_coordinates().reshape(-1, n)
    values = f.values.ravel()
    widths = grid.thin_widths
    volume = widths
    for _ in range(n - 1):
        volume = np.multiply.outer(volume, widths)
    volume = np.asarray(volume).ravel()
    distance = np.sqrt(np.sum((points - np.asarray(region.center)) ** 2, axis=-1))
    inside = distance <= region.radius + 1e-12

    seminorm = 0.0
    outside = ~inside
    for i in np.flatnonzero(inside):
        gap = np.sqrt(np.sum((points - points[i]) ** 2, axis=-1))
        keep = gap >= h / 2.0
        terms = (values[keep] - values[i]) ** 2 / gap[keep] ** (n + 2.0 * alpha) * volume[keep]
        # pairs with the partner outside are counted in both orders
        seminorm += volume[i] * float(np.sum(terms * (1.0 + outside[keep])))
    area = thin_area(grid, f.values, region)
    total = gagliardo_constant(n, alpha) * seminorm + area
    log.debug("Nonlocal functional on %r: seminorm %.6g, area %.6g", region, seminorm, area)
    return float(total)


# transition width of the radial profile, in grid spacings
SHELL_WIDTH = 4.0

# central moments of the Beta(3, 3) bump, orders 0 to 3
_BUMP_MOMENTS = (1.0, 0.0, 1.0 / 28.0, 0.0)
_BUMP = Polynomial([0.0, 0.0, 30.0, -60.0, 30.0])


@attr.s(frozen=True)
class RadialProfile(object):
    """
    Probability density on radii ``[r - w/2, r + w/2]`` proportional to
    ``t^2 (1 - t)^2 rho^n``, ``t = (rho - r + w/2) / w``. Radial quantities
    are averaged against it in place of a sharp sphere of radius ``r``.
    """
    radius = attr.ib(converter=float)
    width = attr.ib(converter=float)
    n = attr.ib(converter=int)

    @classmethod
    def for_grid(cls, grid, r):
        return cls(r, min(SHELL_WIDTH * grid.h, r), grid.n)

    @property
    def inner(self):
        return self.radius - self.width / 2.0

    @property
    def normalization(self):
        """``1 / E[rho^n]`` under the bare bump."""
        moment = sum(
            math.comb(self.n, k) * self.radius ** (self.n - k) * self.width ** k * _BUMP_MOMENTS[k]
            for k in range(self.n + 1)
        )
        return 1.0 / moment

    def _t(self, dist):
        return np.clip((np.asarray(dist, dtype=float) - self.inner) / self.width, 0.0, 1.0)

    def volume_weight(self, dist):
        """``W(s) = int_s^inf p(rho) rho^{-n}``, constant ``1 / E[rho^n]`` inside the profile."""
        t = self._t(dist)
        return self.normalization * (1.0 - t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2))

    def tail(self, dist):
        """Probability that the averaged radius exceeds ``dist``."""
        t = self._t(dist)
        moment = (_BUMP * Polynomial([self.inner, self.width]) ** self.n).integ()
        return self.normalization * (moment(1.0) - moment(t))


def weiss_terms(field, center, r):
    """
    ``Psi(r) = J(u, B_r) / r^n - alpha / r^{n+1} int_{dB_r} |y|^beta u^2``
    for a slab center, averaged over radii against :class:`RadialProfile`.

    The Dirichlet part is taken in Green's form, as the flux
    ``int_{dB_r} |y|^beta u du/dnu``, so the field must be harmonic on its
    positivity set; the two forms agree exactly for discrete solutions.
    Flux and sphere terms are edge sums against the differences of one
    radial weight ``W`` and cancel for homogeneous fields.

    Returns:
        tuple: ``(flux, sphere, area)`` with ``Psi = flux - alpha * sphere + area``.
    """
    grid = field.grid
    ball = Ball(center, r)
    ball.check(grid)
    profile = RadialProfile.for_grid(grid, r)
    dist = np.broadcast_to(ball.distance(grid), grid.shape)
    weight = profile.volume_weight(dist)
    square = field.values ** 2
    log_dist = np.log(np.maximum(dist, grid.h / 2.0))
    flux = sphere = 0.0
    for axis, K in enumerate(grid.conductances):
        step = K * np.diff(weight, axis=axis)
        flux -= float(np.sum(step * np.diff(square, axis=axis)))
        sphere -= 2.0 * float(np.sum(step * grid.edge_means(square, axis) * np.diff(log_dist, axis=axis)))
    cells, centers = positive_cells(grid, field.slab)
    offsets = np.sqrt(np.sum((centers - np.asarray(ball.center)) ** 2, axis=-1))
    area = float(np.sum(profile.volume_weight(offsets)[cells])) * grid.h ** grid.n
    log.debug("Psi at r=%g: flux %.6g, sphere %.6g, area %.6g", r, flux, sphere, area)
    return flux, sphere, area


def weiss_density(field, center, r):
    """``Psi`` at radius ``r`` around a slab center; see :func:`weiss_terms`."""
    flux, sphere, area = weiss_terms(field, center, r)
    return flux - field.grid.spec.alpha * sphere + area


def homogeneity_integrand(field, center):
    """Nodal ``2 |alpha u - (x - x0) . grad u|^2 / |x - x0|^{n+2}`` (zero at ``x0``)."""
    grid = field.grid
    coords = grid.coordinates()
    grads = field.gradient()
    offsets = [coords[axis] - center[axis] for axis in range(grid.n)] + [coords[-1]]
    radial = sum(offsets[axis] * grads[axis] for axis in range(grid.ndim))
    dist2 = sum(o ** 2 for o in offsets)
    dist2 = np.broadcast_to(dist2, grid.shape)
    residual = grid.spec.alpha * field.values - radial
    out = np.zeros(grid.shape)
    nonzero = dist2 > 0.0
    out[nonzero] = 2.0 * residual[nonzero] ** 2 / dist2[nonzero] ** ((grid.n + 2) / 2.0)
    return out


def annulus_deficit(field, center, inner, outer, integrand=None):
    """
    Weighted integral of the homogeneity integrand between the radial
    profiles at ``inner`` and ``outer``, i.e. the predicted increase of
    :func:`weiss_density` from ``inner`` to ``outer``.
    """
    grid = field.grid
    ball = Ball(center, outer)
    ball.check(grid)
    if integrand is None:
        integrand = homogeneity_integrand(field, center)
    dist = ball.distance(grid)
    weights = RadialProfile.for_grid(grid, outer).tail(dist) - RadialProfile.for_grid(grid, inner).tail(dist)
    return 2.0 * float(np.sum(grid.cell_weights * weights * integrand))


@attr.s(frozen=True)
class WeissProfile(object):
    center = attr.ib(converter=tuple)
    radii = attr.ib(converter=tuple)
    psi = attr.ib(converter=tuple)
    deficit = attr.ib(converter=tuple)

    @property
    def identity_gaps(self):
        return tuple(abs((b - a) - d) for a, b, d in zip(self.psi, self.psi[1:], self.deficit))

    @property
    def max_identity_gap(self):
        return max(self.identity_gaps, default=0.0)

    @property
    def monotonicity_violation(self):
        """Largest decrease of ``Psi`` between consecutive radii (0 if monotone)."""
        return max([0.0] + [a - b for a, b in zip(self.psi, self.psi[1:])])

    @property
    def span(self):
        return max(self.psi) - min(self.psi) if self.psi else 0.0

    def rows(self):
        rows = []
        gaps = self.identity_gaps
        for i, (r, psi) in enumerate(zip(self.radii, self.psi)):
            if i == 0:
                rows.append({"r": r, "psi": psi, "deficit_from_prev": "", "identity_gap": ""})
            else:
                rows.append({"r": r, "psi": psi, "deficit_from_prev": self.deficit[i - 1], "identity_gap": gaps[i - 1]})
        return rows

    def as_dict(self):
        return {
            "center": list(self.center),
            "radii": list(self.radii),
            "psi": list(self.psi),
            "deficit": list(self.deficit),
            "max_identity_gap": self.max_identity_gap,
            "monotonicity_violation": self.monotonicity_violation,
        }


def weiss_profile(field, center, radii):
    """``Psi`` at each radius and the deficit integral between consecutive radii."""
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise GridError("Profile radii must be strictly increasing")
    center = tuple(float(c) for c in np.atleast_1d(center))
    psi = [weiss_density(field, center, r) for r in radii]
    integrand = homogeneity_integrand(field, center)
    deficit = [annulus_deficit(field, center, a, b, integrand) for a, b in zip(radii, radii[1:])]
    profile = WeissProfile(center, radii, psi, deficit)
    log.debug(
        "Weiss profile at %s: violation %.3e, identity gap %.3e",
        center, profile.monotonicity_violation, profile.max_identity_gap,
    )
    return profile


def flux_identity_check(field, center, r):
    """
    Both sides of ``int_B |y|^beta |grad u|^2 = int_{dB} |y|^beta u du/dnu``
    for ``B = B_r(center)``.
    """
    grid = field.grid
    ball = Ball(center, r)
    ball.check(grid)
    lhs = dirichlet_energy(field, ball)
    coords = grid.coordinates()
    grads = field.gradient()
    offsets = [coords[axis] - ball.center[axis] for axis in range(grid.n)] + [coords[-1]]
    dist = np.sqrt(sum(o ** 2 for o in offsets))
    with np.errstate(invalid="ignore", divide="ignore"):
        normal = sum(offsets[axis] * grads[axis] for axis in range(grid.ndim)) / dist
    normal = np.where(np.broadcast_to(dist, grid.shape) > 0.0, normal, 0.0)
    rhs = grid.sphere_integral(field.values * normal, ball.center, r)
    return lhs, rhs
