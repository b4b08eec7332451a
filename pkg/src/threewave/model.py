"""Model parameters, derived constants, and the variational functionals.

Fields of the three-component system are stacked as complex arrays of shape
(3, *grid.shape). The energy is

    E(u) = sum_i ( 1/2 ||grad u_i||^2 - 1/p ||u_i||_p^p ) - alpha * Re int u1 u2 conj(u3)

with the mixed masses Q1 = ||u1||^2 + ||u3||^2, Q2 = ||u2||^2 + ||u3||^2 and
the scaling (Pohozaev) functional

    P(u) = sum_i ||grad u_i||^2 - gamma_p sum_i ||u_i||_p^p - (N/2) alpha Re int u1 u2 conj(u3).

The limit functional E0 drops the power term and sets the coupling to one;
its critical points describe the small-mass collapse profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import SpectralGrid, FieldError, fourier_rescale


class ParameterError(ValueError):
    """Model parameters outside the admissible range."""


class DilationError(ValueError):
    """Requested dilation would alias beyond the audit tolerance."""


class GeometryError(RuntimeError):
    """The concave-convex geometry is absent for these constants."""


def mass_critical_exponent(dim: int) -> float:
    return 2.0 + 4.0 / dim


def energy_critical_exponent(dim: int) -> float:
    return 6.0 if dim == 3 else math.inf


@dataclass(frozen=True)
class ModelParams:
    """(N, p, alpha, a1, a2) with the admissibility checks of the model."""

    dim: int
    p: float
    alpha: float
    a1: float
    a2: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ParameterError(f"dim must be 1, 2 or 3, got {self.dim}")
        lo = mass_critical_exponent(self.dim)
        hi = energy_critical_exponent(self.dim)
        if not (lo <= self.p < hi):
            raise ParameterError(
                f"p={self.p} outside [{lo}, {hi}) for dim={self.dim}"
            )
        if not (self.alpha > 0):
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if not (self.a1 > 0 and self.a2 > 0):
            raise ParameterError(f"a1, a2 must be positive, got {self.a1}, {self.a2}")

    @property
    def gamma_p(self) -> float:
        return self.dim * (self.p - 2.0) / (2.0 * self.p)

    @property
    def is_mass_critical(self) -> bool:
        return abs(self.p - mass_critical_exponent(self.dim)) < 1e-12

    @property
    def max_mass(self) -> float:
        return max(self.a1, self.a2)


# ---------------------------------------------------------------------------
# field-triple helpers
# ---------------------------------------------------------------------------


def as_triple(grid: SpectralGrid, components) -> np.ndarray:
    u = np.asarray(components, dtype=np.complex128)
    if u.shape != (3, *grid.shape):
        raise FieldError(f"triple shape {u.shape} does not match (3, {grid.shape})")
    return u


def gauge_rotate(u: np.ndarray, theta1: float, theta2: float) -> np.ndarray:
    """(u1, u2, u3) -> (e^{i th1} u1, e^{i th2} u2, e^{i (th1+th2)} u3)."""
    phases = np.exp(1j * np.array([theta1, theta2, theta1 + theta2]))
    return u * phases.reshape(3, *([1] * (u.ndim - 1)))


def random_triple(grid: SpectralGrid, rng: np.random.Generator, width: float | None = None,
                  complex_fields: bool = True) -> np.ndarray:
    """Smooth random decaying triple (low-pass noise under a Gaussian envelope)."""
    if width is None:
        width = grid.box_half_length / 6.0
    envelope = np.exp(-grid.radius_sq() / (2.0 * width**2))
    kc = 4.0 / width
    lowpass = np.exp(-grid.k_sq / kc**2)
    out = np.empty((3, *grid.shape), dtype=np.complex128)
    for i in range(3):
        noise = rng.standard_normal(grid.shape)
        if complex_fields:
            noise = noise + 1j * rng.standard_normal(grid.shape)
        out[i] = envelope * np.fft.ifftn(lowpass * np.fft.fftn(noise))
    return out


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiberScalars:
    """The three norms that determine the energy along the dilation fiber."""

    kinetic: float
    potential_pp: float  # sum_i int |u_i|^p
    interaction: float   # Re int u1 u2 conj(u3)


def triple_scalars(params: ModelParams, grid: SpectralGrid, u: np.ndarray) -> FiberScalars:
    u = as_triple(grid, u)
    kin = sum(grid.gradient_norm_sq(u[i]) for i in range(3))
    pot = sum(grid.lp_norm_pp(u[i], params.p) for i in range(3))
    inter = float(grid.integrate(u[0] * u[1] * u[2].conj()).real)
    return FiberScalars(kin, pot, inter)


def kinetic_energy(grid: SpectralGrid, u: np.ndarray) -> float:
    u = as_triple(grid, u)
    return sum(grid.gradient_norm_sq(u[i]) for i in range(3))


def interaction(grid: SpectralGrid, u: np.ndarray) -> float:
    """Re int u1 u2 conj(u3); positivity defines membership in the set M."""
    u = as_triple(grid, u)
    return float(grid.integrate(u[0] * u[1] * u[2].conj()).real)


restriction_indicator = interaction


def masses(grid: SpectralGrid, u: np.ndarray) -> tuple[float, float]:
    u = as_triple(grid, u)
    n1, n2, n3 = (grid.l2_norm_sq(u[i]) for i in range(3))
    return n1 + n3, n2 + n3


def energy(params: ModelParams, grid: SpectralGrid, u: np.ndarray) -> float:
    s = triple_scalars(params, grid, u)
    return 0.5 * s.kinetic - s.potential_pp / params.p - params.alpha * s.interaction


def pohozaev(params: ModelParams, grid: SpectralGrid, u: np.ndarray) -> float:
    s = triple_scalars(params, grid, u)
    return pohozaev_from_scalars(params, s)


def pohozaev_from_scalars(params: ModelParams, s: FiberScalars) -> float:
    return (s.kinetic - params.gamma_p * s.potential_pp
            - 0.5 * params.dim * params.alpha * s.interaction)


def energy_from_scalars(params: ModelParams, s: FiberScalars) -> float:
    return 0.5 * s.kinetic - s.potential_pp / params.p - params.alpha * s.interaction


def limit_energy(grid: SpectralGrid, u: np.ndarray) -> float:
    """E0(u) = 1/2 sum ||grad u_i||^2 - Re int u1 u2 conj(u3)."""
    u = as_triple(grid, u)
    kin = sum(grid.gradient_norm_sq(u[i]) for i in range(3))
    return 0.5 * kin - interaction(grid, u)


def limit_pohozaev(grid: SpectralGrid, u: np.ndarray) -> float:
    """P0(u) = sum ||grad u_i||^2 - (N/2) Re int u1 u2 conj(u3)."""
    u = as_triple(grid, u)
    kin = sum(grid.gradient_norm_sq(u[i]) for i in range(3))
    return kin - 0.5 * grid.dim * interaction(grid, u)


@dataclass(frozen=True)
class Diagnostics:
    """All evaluated functionals of one field triple."""

    energy: float
    limit_energy: float
    mass1: float
    mass2: float
    pohozaev: float
    kinetic: float
    power_potential: float
    interaction: float


def diagnostics(params: ModelParams, grid: SpectralGrid, u: np.ndarray) -> Diagnostics:
    s = triple_scalars(params, grid, u)
    q1, q2 = masses(grid, u)
    return Diagnostics(
        energy=energy_from_scalars(params, s),
        limit_energy=0.5 * s.kinetic - s.interaction,
        mass1=q1,
        mass2=q2,
        pohozaev=pohozaev_from_scalars(params, s),
        kinetic=s.kinetic,
        power_potential=s.potential_pp,
        interaction=s.interaction,
    )


# ---------------------------------------------------------------------------
# dilation and fiber maps
# ---------------------------------------------------------------------------


def dilate(grid: SpectralGrid, u: np.ndarray, s: float, mass_tol: float = 1e-8) -> np.ndarray:
    """Mass-preserving dilation (s^{N/2} u_i(s x)) by Fourier resampling.

    The trig interpolant is evaluated at the stretched nodes; the masses of
    the result are audited against the input and the dilation is rejected
    when aliasing moves them by more than mass_tol (relative).
    """
    u = as_triple(grid, u)
    if not (s > 0):
        raise DilationError(f"dilation parameter must be positive, got {s}")
    if s == 1.0:
        return u.copy()
    amp = s ** (0.5 * grid.dim)
    out = np.stack([fourier_rescale(grid, u[i], s, amp) for i in range(3)])
    q_in = masses(grid, u)
    q_out = masses(grid, out)
    for qi, qo in zip(q_in, q_out):
        if qi > 0 and abs(qo - qi) > mass_tol * qi:
            raise DilationError(
                f"dilation s={s} aliases: mass error {abs(qo - qi) / qi:.3e} exceeds {mass_tol:.1e}"
            )
    return out


def fiber_map(params: ModelParams, scalars: FiberScalars, s: float) -> float:
    """Energy along the mass-preserving dilation, from the cached norms."""
    if s <= 0:
        raise ValueError(f"fiber parameter must be positive, got {s}")
    return (0.5 * s**2 * scalars.kinetic
            - s ** (params.p * params.gamma_p) / params.p * scalars.potential_pp
            - s ** (0.5 * params.dim) * params.alpha * scalars.interaction)


def fiber_derivatives(params: ModelParams, scalars: FiberScalars, s: float) -> tuple[float, float]:
    """First and second s-derivatives of the fiber energy, closed form."""
    if s <= 0:
        raise ValueError(f"fiber parameter must be positive, got {s}")
    pg = params.p * params.gamma_p
    nh = 0.5 * params.dim
    d1 = (s * scalars.kinetic
          - params.gamma_p * s ** (pg - 1.0) * scalars.potential_pp
          - nh * s ** (nh - 1.0) * params.alpha * scalars.interaction)
    d2 = (scalars.kinetic
          - params.gamma_p * (pg - 1.0) * s ** (pg - 2.0) * scalars.potential_pp
          - nh * (nh - 1.0) * s ** (nh - 2.0) * params.alpha * scalars.interaction)
    return d1, d2


# ---------------------------------------------------------------------------
# derived constants and the geometry function h
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DerivedConstants:
    """Explicit constants controlling the concave-convex geometry.

    rho_star and R1 are +inf in the mass-critical case, where the energy is
    coercive below the mass threshold and there is no outer barrier.
    """

    gamma_p: float
    gn_constant_p: float
    gn_constant_3: float
    A1: float
    A2: float
    D: float
    rho_star: float
    R0: float | None
    R1: float | None


def threshold_D(params: ModelParams, gn_p: float, gn_3: float) -> float:
    """Mass threshold below which h has a positive bump.

    Closed form; reduces to the mass-critical threshold at p = 2 + 4/N.
    """
    n, p, alpha = params.dim, params.p, params.alpha
    if abs(p - 3.0) < 1e-12:
        raise ParameterError("threshold formula is singular at p=3 (out of the admissible range)")
    if params.is_mass_critical:
        return mass_critical_threshold(params, gn_p)
    pg = p * params.gamma_p
    e1 = (n * (p - 2.0) - 4.0) / (4.0 * (p - 3.0))
    e2 = (4.0 - n) / (4.0 * (p - 3.0))
    base1 = 3.0 * (pg - 2.0) / (alpha * gn_3**3 * (2.0 * pg - n))
    base2 = p * (4.0 - n) / (2.0 * (2.0 * pg - n) * gn_p**p)
    return base1**e1 * base2**e2


def rho_star(params: ModelParams, gn_p: float, gn_3: float) -> float:
    """Kinetic-radius barrier of the local well; independent of a1, a2."""
    if params.is_mass_critical:
        return math.inf
    n, p = params.dim, params.p
    pg = p * params.gamma_p
    d = threshold_D(params, gn_p, gn_3)
    base = p * (4.0 - n) / (2.0 * (2.0 * pg - n) * gn_p**p)
    return base ** (1.0 / (pg - 2.0)) * d ** (-p * (1.0 - params.gamma_p) / (pg - 2.0))


def mass_critical_threshold(params: ModelParams, gn_crit: float) -> float:
    """((N+2)/N)^{N/4} C(N, 2+4/N)^{-(N+2)/2}; requires p = 2 + 4/N."""
    if not params.is_mass_critical:
        raise ParameterError(f"p={params.p} is not the mass-critical exponent for dim={params.dim}")
    n = params.dim
    return ((n + 2.0) / n) ** (0.25 * n) * gn_crit ** (-0.5 * (n + 2.0))


def geometry_h(params: ModelParams, constants: DerivedConstants, rho) -> np.ndarray | float:
    """h(rho) = rho^2/2 - A1 rho^{p gamma_p} - A2 rho^{N/2}, lower bound for E."""
    rho = np.asarray(rho, dtype=float)
    pg = params.p * params.gamma_p
    val = 0.5 * rho**2 - constants.A1 * rho**pg - constants.A2 * rho ** (0.5 * params.dim)
    return float(val) if val.ndim == 0 else val


def _bisect(fun, lo, hi, flo, tol):
    # plain bisection on a sign change; ~50 iterations to 1e-12 relative
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < tol * max(1.0, abs(mid)):
            return mid
        fm = fun(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def h_roots(params: ModelParams, constants: DerivedConstants, tol: float = 1e-12) -> tuple[float, float]:
    """Zeros R0 <= R1 of h; coincident at the threshold mass, (R0, inf) when
    the quadratic coefficient stays positive (mass-critical branch)."""
    h = lambda r: geometry_h(params, constants, r)
    if params.is_mass_critical:
        if constants.A1 >= 0.5:
            raise GeometryError("mass at or above the critical threshold: h never positive")
        r0 = (constants.A2 / (0.5 - constants.A1)) ** (2.0 / (4.0 - params.dim))
        return r0, math.inf
    pg = params.p * params.gamma_p
    rho_peak = (1.0 / (pg * constants.A1)) ** (1.0 / (pg - 2.0))  # scale of the bump
    grid_r = np.geomspace(1e-8 * rho_peak, 1e4 * rho_peak, 4001)
    vals = h(grid_r)
    imax = int(np.argmax(vals))
    if vals[imax] <= 0.0:
        scale = max(abs(vals).max(), 1.0)
        if vals[imax] > -1e-10 * scale:
            # threshold case: double root at the top of the bump
            return grid_r[imax], grid_r[imax]
        raise GeometryError("h has no positive region (masses above the threshold D)")
    i_lo = int(np.argmax(vals > 0))  # first positive sample
    r0 = _bisect(h, grid_r[i_lo - 1], grid_r[i_lo], vals[i_lo - 1], tol)
    after = np.nonzero(vals[imax:] < 0)[0]
    if len(after) == 0:
        raise GeometryError("failed to bracket the outer zero of h")
    j = imax + int(after[0])
    r1 = _bisect(lambda r: -h(r), grid_r[j - 1], grid_r[j], -vals[j - 1], tol)
    return r0, r1


def derive_constants(params: ModelParams, gn_p: float, gn_3: float) -> DerivedConstants:
    """Assemble all explicit constants from the two sharp interpolation constants."""
    n, p, alpha = params.dim, params.p, params.alpha
    gp = params.gamma_p
    amax = params.max_mass
    a1c = gn_p**p / p * amax ** (p * (1.0 - gp))
    a2c = alpha / 3.0 * gn_3**3 * amax ** (0.5 * (6.0 - n))
    d = threshold_D(params, gn_p, gn_3)
    rs = rho_star(params, gn_p, gn_3)
    consts = DerivedConstants(
        gamma_p=gp, gn_constant_p=gn_p, gn_constant_3=gn_3,
        A1=a1c, A2=a2c, D=d, rho_star=rs, R0=None, R1=None,
    )
    if amax <= d * (1.0 + 1e-12):
        try:
            r0, r1 = h_roots(params, consts)
        except GeometryError:
            r0 = r1 = None
        consts = DerivedConstants(
            gamma_p=gp, gn_constant_p=gn_p, gn_constant_3=gn_3,
            A1=a1c, A2=a2c, D=d, rho_star=rs, R0=r0, R1=r1,
        )
    return consts
