"""Solvers for the transverse-trace constraint field h^T of a static source.

The field obeys the Poisson equation del^2 h^T = -kappa E with fields
vanishing at infinity, equivalently

    h^T(x) = (kappa / 4 pi) int d^3y E(y) / |x - y|.

Two backends evaluate the same discrete quadrature of that integral on the
lattice (midpoint rule, singular self cell replaced by the analytic cell
average of 1/r):

* `solve_hT_direct` sums the kernel in position space, chunk by chunk.  It is
  deliberately slow code with no FFT anywhere, kept as the oracle.
* `solve_hT_spectral` performs the identical free-space convolution by
  zero-padded grid doubling (Hockney): the 1/r kernel is tabulated on the
  doubled box with the cell-averaged value at the origin (which also renders
  its k = 0 Fourier mode finite), transformed, multiplied and transformed
  back.  Periodic images never contaminate the result because every source to
  target displacement of the original box is covered by the doubled box.

Continuum fidelity is checked elsewhere against closed forms (point far
field, mutual Gaussian energies) and the discrete Laplacian residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import erf

from .grids import GridSpec
from .sources import EnergyDensity, PhysicalConstants, sample_on_grid

DIRECT_N_LIMIT = 48


@dataclass(frozen=True)
class ScalarFieldX:
    """Real scalar field sampled on the grid nodes."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.n,) * 3:
            raise ValueError("field shape does not match grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field entries must be finite")


@lru_cache(maxsize=1)
def _unit_cube_inv_r_average() -> float:
    """Average of 1/|r| over the unit cube centred at the origin.

    Uses 1/r = (2/sqrt(pi)) int_0^inf exp(-u^2 r^2) du, which factorises the
    cube integral into erf's:  integral = 2 pi int_0^inf erf(u/2)^3 / u^3 du.
    """

    def integrand(u):
        if u < 1e-8:
            return math.pi ** -1.5
        return (erf(u / 2.0) / u) ** 3

    val, _ = quad(integrand, 0.0, np.inf, limit=200)
    return 2.0 * math.pi * val


def cell_averaged_inv_r(h: float) -> float:
    """Cell average of 1/r for a cubic cell of side h centred on the node."""
    return _unit_cube_inv_r_average() / h


def _as_grid_values(e: EnergyDensity, grid: GridSpec, consts: PhysicalConstants) -> np.ndarray:
    return sample_on_grid(e, grid, consts).values


def _displacement_kernel_1d(grid: GridSpec) -> np.ndarray:
    """Signed displacements covered by the doubled lattice, length 2n."""
    n2 = 2 * grid.n
    idx = np.arange(n2)
    idx = np.where(idx < grid.n, idx, idx - n2)  # minimum image on the doubled box
    return idx * grid.h


def _coulomb_kernel(grid: GridSpec) -> np.ndarray:
    d = _displacement_kernel_1d(grid)
    r2 = d[:, None, None] ** 2 + d[None, :, None] ** 2 + d[None, None, :] ** 2
    with np.errstate(divide="ignore"):
        k = 1.0 / np.sqrt(r2)
    k[0, 0, 0] = cell_averaged_inv_r(grid.h)
    return k


def solve_hT_spectral(e: EnergyDensity, grid: GridSpec, consts: PhysicalConstants) -> ScalarFieldX:
    """Free-space solve by zero-padded FFT convolution (see module docstring)."""
    vals = _as_grid_values(e, grid, consts)
    n2 = 2 * grid.n
    padded = np.zeros((n2,) * 3)
    padded[: grid.n, : grid.n, : grid.n] = vals
    kernel = _coulomb_kernel(grid)
    conv = np.fft.irfftn(np.fft.rfftn(padded) * np.fft.rfftn(kernel),
                         s=(n2,) * 3, axes=(0, 1, 2))
    out = conv[: grid.n, : grid.n, : grid.n] * (consts.kappa / (4.0 * math.pi)) * grid.cell_volume
    return ScalarFieldX(grid=grid, values=out)


def solve_hT_direct(
    e: EnergyDensity,
    grid: GridSpec,
    consts: PhysicalConstants,
    stride: int = 1,
    chunk: int = 256,
) -> ScalarFieldX:
    """Position-space quadrature oracle.

    With stride > 1 the field is evaluated on the coarser sub-lattice only
    (every stride-th node per axis), which keeps the O(N^6) cost in check;
    the returned field then lives on GridSpec(n // stride, box).
    """
    if grid.n > DIRECT_N_LIMIT:
        raise ValueError(f"direct solver guarded to N <= {DIRECT_N_LIMIT}")
    if grid.n % stride:
        raise ValueError("stride must divide N")
    vals = _as_grid_values(e, grid, consts)
    ax = grid.axes()
    src = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    weights = vals.reshape(-1) * grid.cell_volume
    tax = ax[::stride]
    targets = np.stack(np.meshgrid(tax, tax, tax, indexing="ij"), axis=-1).reshape(-1, 3)
    self_kernel = cell_averaged_inv_r(grid.h)
    out = np.empty(len(targets))
    for start in range(0, len(targets), chunk):
        t = targets[start : start + chunk]
        diff = t[:, None, :] - src[None, :, :]
        r = np.sqrt((diff**2).sum(axis=-1))
        inv = np.empty_like(r)
        zero = r == 0.0
        inv[~zero] = 1.0 / r[~zero]
        inv[zero] = self_kernel
        out[start : start + chunk] = inv @ weights
    out *= consts.kappa / (4.0 * math.pi)
    ngrid = GridSpec(grid.n // stride, grid.box) if stride > 1 else grid
    return ScalarFieldX(grid=ngrid, values=out.reshape((grid.n // stride,) * 3))


def _pair_is_analytic(e: EnergyDensity) -> bool:
    return e.analytic


def _pair_width(e: EnergyDensity, grid: GridSpec | None) -> float:
    if e.kind == "gaussian":
        return float(e.sigma)
    if e.sigma:
        return float(e.sigma)
    if grid is not None:
        return 2.0 * grid.h
    raise ValueError("point profile needs an explicit regularisation width "
                     "when no grid is given")


def coulomb_pair_analytic(e_a: EnergyDensity, e_b: EnergyDensity, consts: PhysicalConstants,
                          grid: GridSpec | None = None) -> float:
    """Closed form of int E_A(x) E_B(y) / |x-y| for Gaussian/point profiles.

    The displacement of two Gaussian clouds is Gaussian with summed
    covariance, so the pair integral is m_A m_B c^4 erf(d / sqrt(2) s) / d
    with s^2 = sigma_A^2 + sigma_B^2 (and the d -> 0 limit for coincident
    centers).
    """
    if not (_pair_is_analytic(e_a) and _pair_is_analytic(e_b)):
        raise ValueError("analytic backend needs point or gaussian profiles")
    sa = _pair_width(e_a, grid)
    sb = _pair_width(e_b, grid)
    s = math.sqrt(sa**2 + sb**2)
    d = float(np.linalg.norm(np.subtract(e_a.center, e_b.center)))
    m2c4 = e_a.mass * e_b.mass * consts.c**4
    if d == 0.0:
        return m2c4 * math.sqrt(2.0 / math.pi) / s
    return m2c4 * erf(d / (math.sqrt(2.0) * s)) / d


def _sample_profile_points(e: EnergyDensity, n: int, rng: np.random.Generator,
                           grid: GridSpec | None) -> np.ndarray:
    sigma = _pair_width(e, grid)
    return rng.normal(loc=e.center, scale=sigma, size=(n, 3))


def coulomb_pair_mc(
    e_a: EnergyDensity,
    e_b: EnergyDensity,
    consts: PhysicalConstants,
    samples: int = 1_000_000,
    seed: int = 0,
    grid: GridSpec | None = None,
    batch: int = 1_000_000,
):
    """6-D Monte-Carlo estimate of the Coulomb pair integral with its
    standard error.  Positions are drawn exactly from the (Gaussian)
    profiles, so the estimator is mean of m_A m_B c^4 / |x - y|."""
    if not (_pair_is_analytic(e_a) and _pair_is_analytic(e_b)):
        raise ValueError("mc backend needs point or gaussian profiles")
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        xa = _sample_profile_points(e_a, m, rng, grid)
        xb = _sample_profile_points(e_b, m, rng, grid)
        inv = 1.0 / np.linalg.norm(xa - xb, axis=1)
        total += inv.sum()
        total_sq += (inv**2).sum()
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0)
    scale = e_a.mass * e_b.mass * consts.c**4
    return scale * mean, scale * math.sqrt(var / samples)


def coulomb_pair_grid(e_a: EnergyDensity, e_b: EnergyDensity, consts: PhysicalConstants,
                      grid: GridSpec) -> float:
    """Grid quadrature: contract E_A with the solved potential of E_B."""
    va = _as_grid_values(e_a, grid, consts)
    h_b = solve_hT_spectral(e_b, grid, consts)
    pot = h_b.values * (4.0 * math.pi / consts.kappa)
    return float((va * pot).sum() * grid.cell_volume)


def mutual_coulomb(
    e_a: EnergyDensity,
    e_b: EnergyDensity,
    consts: PhysicalConstants,
    backend: str = "auto",
    grid: GridSpec | None = None,
    mc_samples: int = 1_000_000,
    seed: int = 0,
):
    """int d^3x d^3y E_A(x) E_B(y) / |x - y|, returned as (value, stderr).

    backend: "analytic" (Gaussian/point closed form), "grid" (spectral solve
    plus contraction), "mc" (6-D Monte Carlo), or "auto" which picks the
    closed form when both profiles are analytic and the grid route otherwise.
    stderr is zero for the deterministic backends.
    """
    if backend == "auto":
        backend = "analytic" if (_pair_is_analytic(e_a) and _pair_is_analytic(e_b)) else "grid"
    if backend == "analytic":
        return coulomb_pair_analytic(e_a, e_b, consts, grid), 0.0
    if backend == "mc":
        return coulomb_pair_mc(e_a, e_b, consts, samples=mc_samples, seed=seed, grid=grid)
    if backend == "grid":
        if grid is None:
            raise ValueError("grid backend needs a GridSpec")
        return coulomb_pair_grid(e_a, e_b, consts, grid), 0.0
    raise ValueError(f"unknown backend {backend!r}")


def laplacian_residual(field: ScalarFieldX, e: EnergyDensity, consts: PhysicalConstants,
                       margin: int = 3):
    """RMS of the 7-point discrete Laplacian residual del^2 h + kappa E,
    relative to RMS(kappa E), both evaluated away from boundary cells."""
    grid = field.grid
    vals = field.values
    h2 = grid.h**2
    lap = (
        np.roll(vals, 1, 0) + np.roll(vals, -1, 0)
        + np.roll(vals, 1, 1) + np.roll(vals, -1, 1)
        + np.roll(vals, 1, 2) + np.roll(vals, -1, 2)
        - 6.0 * vals
    ) / h2
    src = consts.kappa * _as_grid_values(e, grid, consts)
    sl = slice(margin, grid.n - margin)
    res = lap[sl, sl, sl] + src[sl, sl, sl]
    rms_res = float(np.sqrt((res**2).mean()))
    rms_src = float(np.sqrt((src[sl, sl, sl] ** 2).mean()))
    return rms_res, rms_src
