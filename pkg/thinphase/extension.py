"""
Poisson kernel of the operator ``div(|y|^beta grad .)``, extensions of thin
data, the closed-form half-space solution and fractional Laplacian traces.

The kernel is normalised to unit mass, so constants extend to constants.
In that gauge the flux limit ``lim y^beta u_y`` equals
``-kappa_alpha * (-Delta)^alpha f`` (see :func:`flux_constant`).
"""
import logging

import attr
import numpy as np
from scipy import ndimage
from scipy.special import betainc, gamma

from .exceptions import GridError
from .grid import ALPHA_MAX, ALPHA_MIN, MAX_THIN_DIMENSION, ScalarField

# Module-level logger
log = logging.getLogger(__name__)

MASS_TARGET = 0.999


def kernel_constant(n, alpha):
    """``c_{n,alpha}`` making ``P_y`` a probability density on R^n."""
    return gamma(n / 2.0 + alpha) / (np.pi ** (n / 2.0) * gamma(alpha))


def flux_constant(alpha):
    """``kappa_alpha = 2^{1-2alpha} Gamma(1-alpha) / Gamma(alpha)``."""
    return 2.0 ** (1.0 - 2.0 * alpha) * gamma(1.0 - alpha) / gamma(alpha)


def fractional_laplacian_constant(n, alpha):
    """Constant ``C(n, alpha)`` of the singular-integral form of ``(-Delta)^alpha``."""
    return 4.0 ** alpha * gamma(n / 2.0 + alpha) / (np.pi ** (n / 2.0) * abs(gamma(-alpha)))


def gagliardo_constant(n, alpha):
    """
    Constant in front of the Gagliardo double integral such that the
    full-space weighted energy of the unit-mass extension equals
    ``c * iint |f(x) - f(xi)|^2 / |x - xi|^{n + 2 alpha}``. For ``n = 1`` and
    ``alpha = 1/2`` this is ``1/pi``.
    """
    return flux_constant(alpha) * fractional_laplacian_constant(n, alpha)


@attr.s(frozen=True)
class ExtensionConfig(object):
    n = attr.ib(converter=int)
    alpha = attr.ib(converter=float)
    truncation_radius = attr.ib(default=1.0, converter=float)

    def __attrs_post_init__(self):
        if not 1 <= self.n <= MAX_THIN_DIMENSION:
            raise GridError("Thin dimension must be between 1 and {}".format(MAX_THIN_DIMENSION))
        if not ALPHA_MIN <= self.alpha <= ALPHA_MAX:
            raise GridError("alpha must lie in [{}, {}]".format(ALPHA_MIN, ALPHA_MAX))
        if self.truncation_radius <= 0:
            raise GridError("Truncation radius must be positive")

    @classmethod
    def for_grid(cls, grid, truncation_radius=None):
        if truncation_radius is None:
            truncation_radius = 2.0 * grid.spec.half_extent
        return cls(grid.n, grid.spec.alpha, truncation_radius)

    @property
    def normalization(self):
        return float(kernel_constant(self.n, self.alpha))


@attr.s(frozen=True, eq=False)
class ThinFunction(object):
    """Nonnegative values on the ``y = 0`` slab of ``grid``."""
    grid = attr.ib()
    values = attr.ib()

    def __attrs_post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (self.grid.spec.thin_count,) * self.grid.n
        if values.shape != expected:
            raise ValueError("Thin function shape {} does not match slab {}".format(values.shape, expected))
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ValueError("Thin function values must be finite and nonnegative")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def spec(self):
        return self.grid.spec

    @classmethod
    def from_field(cls, field):
        return cls(field.grid, np.maximum(field.slab, 0.0))


def poisson_kernel(cfg, xi, y):
    """
    ``P(xi, y) = c |y|^{2 alpha} / |(xi, y)|^{n + 2 alpha}``; raises for ``y = 0``.
    Offsets have shape ``(..., n)``, or are plain scalars when ``n = 1``.
    """
    xi = np.asarray(xi, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y == 0.0):
        raise ValueError("The Poisson kernel is singular at y = 0")
    r2 = xi ** 2 if cfg.n == 1 else np.sum(xi ** 2, axis=-1)
    return cfg.normalization * np.abs(y) ** (2.0 * cfg.alpha) / (r2 + y ** 2) ** ((cfg.n + 2.0 * cfg.alpha) / 2.0)


def kernel_mass(cfg, y, radius):
    """Mass of ``P_y`` inside ``|xi| <= radius``: ``I_{r^2/(r^2+y^2)}(n/2, alpha)``."""
    radius = np.asarray(radius, dtype=float)
    return betainc(cfg.n / 2.0, cfg.alpha, radius ** 2 / (radius ** 2 + np.asarray(y, dtype=float) ** 2))


def _kernel_cdf(s, y, alpha):
    """``int_0^s P_y`` for ``n = 1`` (odd in ``s``)."""
    return np.sign(s) * 0.5 * betainc(0.5, alpha, s ** 2 / (s ** 2 + y ** 2))


def _kernel_moment(s, y, alpha):
    """An antiderivative of ``t P_y(t)`` for ``n = 1``."""
    c = kernel_constant(1, alpha)
    if abs(alpha - 0.5) < 1e-12:
        return c * y * 0.5 * np.log(s ** 2 + y ** 2)
    return c * y ** (2.0 * alpha) * (s ** 2 + y ** 2) ** (0.5 - alpha) / (1.0 - 2.0 * alpha)


def _extend_line(cfg, f, grid):
    """
    Exact extension of the piecewise linear interpolant of ``f`` continued
    by its end values; every kernel cell integral is closed form.
    """
    x = grid.thin_coords
    out = np.empty(grid.shape)
    out[:, 0] = f
    slope = np.diff(f) / grid.h
    for j, y in enumerate(grid.y_coords[1:], start=1):
        a = x[None, :-1] - x[:, None]
        b = x[None, 1:] - x[:, None]
        mass = _kernel_cdf(b, y, cfg.alpha) - _kernel_cdf(a, y, cfg.alpha)
        moment = _kernel_moment(b, y, cfg.alpha) - _kernel_moment(a, y, cfg.alpha)
        inner = np.sum((f[None, :-1] - slope[None, :] * a) * mass + slope[None, :] * moment, axis=1)
        left = f[0] * (_kernel_cdf(x[0] - x, y, cfg.alpha) + 0.5)
        right = f[-1] * (0.5 - _kernel_cdf(x[-1] - x, y, cfg.alpha))
        out[:, j] = inner + left + right
    return out


def _extend_sampled(cfg, f, grid):
    """Discrete convolution with the sampled kernel, renormalised to unit mass."""
    out = np.empty(grid.shape)
    out[..., 0] = f
    reach = min(int(np.floor(cfg.truncation_radius / grid.h)), grid.spec.thin_count - 1)
    offsets = grid.h * np.arange(-reach, reach + 1)
    mesh = np.meshgrid(*([offsets] * grid.n), indexing="ij")
    r2 = sum(m ** 2 for m in mesh)
    for j, y in enumerate(grid.y_coords[1:], start=1):
        kernel = y ** (2.0 * cfg.alpha) / (r2 + y ** 2) ** ((grid.n + 2.0 * cfg.alpha) / 2.0)
        captured = float(kernel_mass(cfg, y, reach * grid.h))
        if captured < MASS_TARGET:
            log.debug("Kernel window captures %.4f of the mass at y=%g", captured, y)
        kernel /= kernel.sum()
        out[..., j] = ndimage.correlate(f, kernel, mode="nearest")
    return out


def poisson_extend(cfg, f, grid):
    """
    Extend thin data ``f`` into the half space by ``u(., y) = f * P_y``.

    Beyond the slab, ``f`` is continued by its value at the nearest slab
    boundary node. In one thin dimension the kernel cell integrals are
    exact for the piecewise linear interpolant of ``f``; in two or three
    the kernel is sampled on a window of radius ``cfg.truncation_radius``
    and renormalised to unit discrete mass. The trace equals ``f`` exactly.

    Returns:
        ScalarField: the even extension.
    """
    if cfg.n != grid.n:
        raise GridError("Extension configured for n={} applied to an n={} grid".format(cfg.n, grid.n))
    values = np.asarray(f.values if isinstance(f, ThinFunction) else f, dtype=float)
    if grid.n == 1:
        out = _extend_line(cfg, values, grid)
    else:
        out = _extend_sampled(cfg, values, grid)
    return ScalarField(grid, np.maximum(out, 0.0))


def trivial_profile(t, y, alpha):
    """
    ``((sqrt(t^2 + y^2) + t) / 2)^alpha``, the extension of ``t_+^alpha``.
    Evaluated without cancellation on ``t < 0``.
    """
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    rho = np.sqrt(t ** 2 + y ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.where(t < 0.0, y ** 2 / (rho - t), rho + t)
    base = np.where(rho == 0.0, 0.0, base)
    return (0.5 * base) ** alpha


def _unit_direction(direction, n):
    direction = np.atleast_1d(np.asarray(direction, dtype=float))
    if direction.shape != (n,):
        raise ValueError("Direction must have {} components".format(n))
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("Direction {} is not a unit vector".format(direction.tolist()))
    return direction


def minimizing_amplitude(alpha):
    """
    Amplitude ``c`` at which ``c U`` minimises the local functional with a
    unit area weight: the free-boundary flux of ``U`` is
    ``2^{2 - 2 alpha} pi alpha^2 / sin(pi alpha)`` and ``c^2`` is its
    reciprocal (``sqrt(2 / pi)`` at ``alpha = 1/2``). :func:`trivial_solution`
    itself keeps ``c = 1``.
    """
    flux = 2.0 ** (2.0 - 2.0 * alpha) * np.pi * alpha ** 2 / np.sin(np.pi * alpha)
    return float(1.0 / np.sqrt(flux))


def trivial_solution(grid, direction=None):
    """
    The closed-form solution ``U = rho^alpha cos^{2 alpha}(theta / 2)`` in the
    plane spanned by ``direction`` and ``y``. Its trace is
    ``(x . direction)_+^alpha``. The default direction is the last thin axis.
    """
    if direction is None:
        direction = np.eye(grid.n)[-1]
    direction = _unit_direction(direction, grid.n)
    coords = grid.coordinates()
    t = sum(coords[axis] * direction[axis] for axis in range(grid.n))
    values = trivial_profile(t, coords[-1], grid.spec.alpha)
    return ScalarField(grid, np.broadcast_to(values, grid.shape))


def frac_laplacian_trace(field, x):
    """
    Estimate of ``lim_{y -> 0} y^beta u_y`` at the slab node ``x`` from the
    three lowest rows: ``g(y) = (u(y) - u(0)) / y^{1 - beta}`` is
    Richardson-extrapolated in ``y^{1 + beta}`` and scaled by ``1 - beta``.
    """
    grid = field.grid
    index = grid.thin_index(x)
    if not grid.slab_free()[index]:
        raise GridError("Trace limit requested on the slab boundary ring at {}".format(list(np.atleast_1d(x))))
    if grid.shape[-1] < 3:
        raise GridError("Trace limit needs at least three vertical nodes")
    return float(_trace_limits(grid, field.values)[index])


def _trace_limits(grid, values):
    """Vectorised trace limits on every slab node (ring values are meaningless)."""
    beta, h = grid.beta, grid.h
    g1 = (values[..., 1] - values[..., 0]) / h ** (1.0 - beta)
    g2 = (values[..., 2] - values[..., 0]) / (2.0 * h) ** (1.0 - beta)
    factor = 2.0 ** (1.0 + beta)
    return (1.0 - beta) * (factor * g1 - g2) / (factor - 1.0)


def trace_limit_map(field):
    """Trace limits on all slab nodes, zero on the boundary ring."""
    grid = field.grid
    if grid.shape[-1] < 3:
        raise GridError("Trace limit needs at least three vertical nodes")
    limits = _trace_limits(grid, field.values)
    return np.where(grid.slab_free(), limits, 0.0)


def fractional_laplacian(field, x):
    """``(-Delta)^alpha`` of the trace at ``x``, recovered from the flux limit."""
    return -frac_laplacian_trace(field, x) / flux_constant(field.grid.spec.alpha)
