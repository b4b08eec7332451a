"""Scalar ground states, sharp interpolation constants, and scalar levels.

The building blocks used by the vector problem: the positive radial solution
w_p of -Lap w + w = |w|^{p-2} w computed by spectral renormalization on the
same periodic grid as everything else, the sharp Gagliardo-Nirenberg
constant C(N, p) it optimizes, the scalar level m(c) on the scaling
constraint, and the closed-form quadratic-coupling level m0(a).
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import SpectralGrid
from .model import ParameterError, energy_critical_exponent, mass_critical_exponent


class ScalarSolveError(RuntimeError):
    """Spectral renormalization failed to converge."""


@dataclass(frozen=True)
class ScalarGroundState:
    field: np.ndarray          # complex dtype, zero imaginary part
    l2_norm_sq: float
    kinetic: float
    lp_norm_pp: float          # int |w|^p
    p: float
    grid: SpectralGrid
    residual: float
    iterations: int

    @property
    def lp_norm(self) -> float:
        return self.lp_norm_pp ** (1.0 / self.p)


def _radial_asymmetry(grid: SpectralGrid, f: np.ndarray) -> float:
    """Max relative deviation under axis flips and axis swaps."""
    peak = np.abs(f).max()
    if peak == 0:
        return 0.0
    worst = 0.0
    for axis in range(grid.dim):
        flipped = np.roll(np.flip(f, axis=axis), 1, axis=axis)  # x -> -x on the periodic lattice
        worst = max(worst, float(np.abs(f - flipped).max()) / peak)
    if grid.dim >= 2:
        for a in range(grid.dim):
            for b in range(a + 1, grid.dim):
                worst = max(worst, float(np.abs(f - np.swapaxes(f, a, b)).max()) / peak)
    return worst


def solve_scalar_ground_state(
    grid: SpectralGrid,
    p: float,
    max_iters: int = 5000,
    change_tol: float = 1e-12,
    residual_tol: float = 1e-8,
) -> ScalarGroundState:
    """Positive radial fixed point of -Lap w + w = |w|^{p-2} w.

    Spectral renormalization (Petviashvili) with the standard stabilizing
    exponent (p-1)/(p-2) for a degree-(p-1) nonlinearity, seeded with a unit
    mass Gaussian.
    """
    if not (2.0 < p < energy_critical_exponent(grid.dim)):
        raise ParameterError(f"scalar exponent p={p} outside (2, 2*) for dim={grid.dim}")
    gamma = (p - 1.0) / (p - 2.0)
    sym = 1.0 + grid.k_sq
    width = min(2.0, grid.box_half_length / 8.0)
    w = np.exp(-grid.radius_sq() / (2.0 * width**2))
    w /= math.sqrt(grid.l2_norm_sq(w))

    residual = math.inf
    for it in range(1, max_iters + 1):
        wh = np.fft.fftn(w)
        nl = np.abs(w) ** (p - 2.0) * w
        nlh = np.fft.fftn(nl)
        num = float(np.sum(sym * (wh.real**2 + wh.imag**2)))
        den = float(np.sum((wh.conj() * nlh).real))
        if den <= 0:
            raise ScalarSolveError(f"renormalization factor lost positivity at iteration {it}")
        s_fac = num / den
        wh_new = s_fac**gamma * nlh / sym
        w_new = np.fft.ifftn(wh_new).real
        change = float(np.abs(w_new - w).max()) / max(float(np.abs(w_new).max()), 1e-300)
        w = w_new
        if change < change_tol:
            residual = _scalar_residual(grid, w, p)
            if residual < residual_tol:
                break
    else:
        residual = _scalar_residual(grid, w, p)
        raise ScalarSolveError(
            f"no convergence in {max_iters} iterations (last residual {residual:.3e})"
        )

    asym = _radial_asymmetry(grid, w)
    if asym > 1e-8:
        raise ScalarSolveError(f"converged profile is not radial (asymmetry {asym:.3e})")
    if float(w.min()) < -1e-14 * float(w.max()):
        raise ScalarSolveError(f"converged profile changes sign (min {w.min():.3e})")
    return ScalarGroundState(
        field=w.astype(np.complex128),
        l2_norm_sq=grid.l2_norm_sq(w),
        kinetic=grid.gradient_norm_sq(w.astype(np.complex128)),
        lp_norm_pp=grid.lp_norm_pp(w, p),
        p=p,
        grid=grid,
        residual=residual,
        iterations=it,
    )


def _scalar_residual(grid: SpectralGrid, w: np.ndarray, p: float) -> float:
    wc = w.astype(np.complex128)
    res = -grid.laplacian(wc) + wc - np.abs(wc) ** (p - 2.0) * wc
    return math.sqrt(grid.l2_norm_sq(res) / grid.l2_norm_sq(wc))


def closed_form_1d(grid: SpectralGrid, p: float) -> np.ndarray:
    """(p/2)^{1/(p-2)} sech^{2/(p-2)}((p-2) x / 2), the exact 1D profile."""
    if grid.dim != 1:
        raise ParameterError("closed form available in one dimension only")
    x = grid.x1d
    return ((p / 2.0) ** (1.0 / (p - 2.0))
            * np.cosh(0.5 * (p - 2.0) * x) ** (-2.0 / (p - 2.0)))


# ---------------------------------------------------------------------------
# sharp Gagliardo-Nirenberg constants, with a small on-disk cache
# ---------------------------------------------------------------------------


def gn_constant_from_state(gs: ScalarGroundState) -> float:
    gamma = gs.grid.dim * (gs.p - 2.0) / (2.0 * gs.p)
    return gs.lp_norm / (gs.kinetic ** (0.5 * gamma) * gs.l2_norm_sq ** (0.5 * (1.0 - gamma)))


class GNConstantCache:
    """One decimal-text record per line: N p M L C; written atomically."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def _records(self) -> dict[tuple, float]:
        out = {}
        if not self.path.exists():
            return out
        for line in self.path.read_text().splitlines():
            parts = line.split()
            if len(parts) != 5:
                continue
            n, m = int(parts[0]), int(parts[2])
            p, L, c = float(parts[1]), float(parts[3]), float(parts[4])
            out[(n, p, m, L)] = c
        return out

    def lookup(self, grid: SpectralGrid, p: float) -> float | None:
        return self._records().get((grid.dim, float(p), grid.points_per_dim, grid.box_half_length))

    def store(self, grid: SpectralGrid, p: float, value: float):
        records = self._records()
        records[(grid.dim, float(p), grid.points_per_dim, grid.box_half_length)] = value
        lines = [
            f"{k[0]} {k[1]:.17g} {k[2]} {k[3]:.17g} {v:.17g}"
            for k, v in sorted(records.items())
        ]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=self.path.name)
        with os.fdopen(fd, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, self.path)


def gn_constant(grid: SpectralGrid, p: float, cache: GNConstantCache | None = None) -> float:
    """Best constant in ||u||_p <= C ||grad u||_2^{gamma_p} ||u||_2^{1-gamma_p},
    evaluated on the computed optimizer."""
    if cache is not None:
        hit = cache.lookup(grid, p)
        if hit is not None:
            return hit
    value = gn_constant_from_state(solve_scalar_ground_state(grid, p))
    if cache is not None:
        cache.store(grid, p, value)
    return value


# ---------------------------------------------------------------------------
# scalar levels
# ---------------------------------------------------------------------------


def scalar_level_m(gs: ScalarGroundState, c: float) -> float:
    """m(c): action of the mass-c member of the w_p scaling family.

    u_c(x) = lam^{1/(p-2)} w_p(lam^{1/2} x) with lam fixed by ||u_c||_2^2 = c^2;
    all norms follow from the cached w_p norms, no resampling.
    """
    if c <= 0:
        raise ParameterError(f"mass parameter must be positive, got {c}")
    p, n = gs.p, gs.grid.dim
    pg = 0.5 * n * (p - 2.0)
    if pg <= 2.0 + 1e-12:
        raise ParameterError(
            f"scalar level m(c) needs p above the mass-critical exponent {mass_critical_exponent(n)}"
        )
    lam = (c**2 / gs.l2_norm_sq) ** ((p - 2.0) / (2.0 - pg))
    kin = lam ** (2.0 / (p - 2.0) + 1.0 - 0.5 * n) * gs.kinetic
    pot = lam ** (p / (p - 2.0) - 0.5 * n) * gs.lp_norm_pp
    return 0.5 * kin - pot / p


def scalar_level_m_state(gs: ScalarGroundState, c: float) -> tuple[float, float, float]:
    """(m(c), kinetic, int |u_c|^p) of the mass-c rescaling, for membership checks."""
    p, n = gs.p, gs.grid.dim
    pg = 0.5 * n * (p - 2.0)
    lam = (c**2 / gs.l2_norm_sq) ** ((p - 2.0) / (2.0 - pg))
    kin = lam ** (2.0 / (p - 2.0) + 1.0 - 0.5 * n) * gs.kinetic
    pot = lam ** (p / (p - 2.0) - 0.5 * n) * gs.lp_norm_pp
    return 0.5 * kin - pot / p, kin, pot


def scalar_level_m0(cubic_gs: ScalarGroundState, alpha: float, a: float) -> float:
    """Closed-form level of the quadratic-coupling scalar problem.

    m0(a) = -((4-N)/(2(6-N))) (alpha^2/||w||_2^2)^{2/(4-N)} a^{2(6-N)/(4-N)},
    with ||w||_2^2 taken from the computed cubic ground state.
    """
    if abs(cubic_gs.p - 3.0) > 1e-12:
        raise ParameterError("m0 requires the cubic (p=3) scalar ground state")
    if alpha <= 0 or a <= 0:
        raise ParameterError("alpha and a must be positive")
    n = cubic_gs.grid.dim
    return (-(4.0 - n) / (2.0 * (6.0 - n))
            * (alpha**2 / cubic_gs.l2_norm_sq) ** (2.0 / (4.0 - n))
            * a ** (2.0 * (6.0 - n) / (4.0 - n)))
