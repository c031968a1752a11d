"""Wigner functions of the field, in either the squeezed or the bare basis.

Quadratures follow the rest of the package: x = A + A^dag, so the
vacuum is an isotropic Gaussian of variance 1 and a coherent state sits
at (2 Re alpha, 2 Im alpha).  With that scaling the Fock-basis kernel
carries a 1/(2 pi) prefactor; everything here is pinned to the single
normalization choice that any Wigner function integrates to 1 over
(X, P).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .fock import DensityMatrix, InvalidStateError, annihilation, expectation
from .gaussian import GaussianState

# fraction of total mass a grid may miss before reconstruction is refused
MASS_TOL = 1e-3

# half-width of auto-sized grids, in standard deviations per axis
AUTO_GRID_SIGMAS = 6.0


class GridCoverageError(ValueError):
    """The phase-space grid cannot hold the state (or the mapped points)."""


class ModeBasis(enum.Enum):
    MODE_A = "mode_A"
    MODE_a = "mode_a"


@dataclass(frozen=True)
class PhaseGrid:
    """Rectangular midpoint grid over the (X, P) plane."""

    x_min: float
    x_max: float
    p_min: float
    p_max: float
    nx: int
    np: int

    def __post_init__(self):
        for v in (self.x_min, self.x_max, self.p_min, self.p_max):
            if not math.isfinite(v):
                raise ValueError("grid extents must be finite")
        if self.x_max <= self.x_min or self.p_max <= self.p_min:
            raise ValueError("grid extents must be increasing")
        if self.nx < 16 or self.np < 16:
            raise ValueError("need at least 16 points per axis")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.np

    @property
    def cell_area(self) -> float:
        return self.dx * self.dp

    @property
    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def p_centers(self) -> np.ndarray:
        return self.p_min + (np.arange(self.np) + 0.5) * self.dp

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable (X, P) arrays; values[i, j] sits at (x_i, p_j)."""
        return self.x_centers[:, None], self.p_centers[None, :]


@dataclass(frozen=True)
class WignerField:
    """Wigner values on a grid, tagged with the basis they live in."""

    grid: PhaseGrid
    values: np.ndarray
    basis_tag: ModeBasis
    squeeze_r: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.nx, self.grid.np):
            raise ValueError(f"values shape {values.shape} does not match "
                             f"grid ({self.grid.nx}, {self.grid.np})")
        if not np.all(np.isfinite(values)):
            raise ValueError("Wigner values must be finite")
        mass = float(values.sum()) * self.grid.cell_area
        if abs(mass - 1.0) > MASS_TOL:
            raise GridCoverageError(
                f"Wigner mass on the grid is {mass:.6f}; the grid misses "
                "more than 0.1% of the state")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def mass(self) -> float:
        return float(self.values.sum()) * self.grid.cell_area

    def moment(self, fx) -> float:
        """Midpoint quadrature of fx(X, P) * W."""
        x, p = self.grid.mesh()
        return float(np.sum(fx(x, p) * self.values)) * self.grid.cell_area


def laguerre(n: int, p: int, x):
    """Associated Laguerre L_n^p(x) by upward recurrence in the degree."""
    if n < 0 or p < 0:
        raise ValueError("laguerre needs n >= 0 and p >= 0")
    arr = np.asarray(x, dtype=float)
    out = np.ones_like(arr)
    if n >= 1:
        cur = p + 1 - arr
        for k in range(1, n):
            out, cur = cur, ((2 * k + p + 1 - arr) * cur
                             - (k + p) * out) / (k + 1)
        out = cur
    return float(out) if arr.ndim == 0 else out


def wigner_basis(m: int, n: int, X, P):
    """Wigner function of |m><n| at the given quadrature points.

    Real for m = n, complex otherwise, with W_{nm} = conj(W_{mn}).  The
    amplitude sqrt(n!/m!) R^{m-n} is assembled in the log domain so
    large index offsets neither overflow nor lose the R = 0 zero.
    """
    if m < 0 or n < 0:
        raise ValueError("Fock indices must be non-negative")
    if m < n:
        return np.conjugate(wigner_basis(n, m, X, P))
    x_arr = np.asarray(X, dtype=float)
    p_arr = np.asarray(P, dtype=float)
    delta = m - n
    r2 = x_arr**2 + p_arr**2
    lag = laguerre(n, delta, r2)
    sign = -1.0 if n % 2 else 1.0
    amp = math.exp(0.5 * (math.lgamma(n + 1) - math.lgamma(m + 1)))
    if delta == 0:
        out = (sign / (2 * math.pi)) * amp * lag * np.exp(-r2 / 2)
        return float(out) if np.ndim(out) == 0 else out
    with np.errstate(divide="ignore"):
        radial = np.exp(delta * 0.5 * np.log(r2) - r2 / 2)
    # the upper-triangle kernel carries the conjugate angular factor, so
    # that rotating the state e^{i phi n} turns the pattern the same way
    # it turns <A>
    phase = np.exp(-1j * delta * np.arctan2(p_arr, x_arr))
    out = (sign / (2 * math.pi)) * amp * lag * radial * phase
    return complex(out) if np.ndim(out) == 0 else out


def _operator_extents(rho: DensityMatrix) -> tuple[float, float, float, float]:
    a = annihilation(rho.space)
    x_op = a + a.dag()
    p_op = 1j * (a.dag() - a)
    mx = expectation(x_op, rho).real
    mp = expectation(p_op, rho).real
    vx = expectation(x_op @ x_op, rho).real - mx**2
    vp = expectation(p_op @ p_op, rho).real - mp**2
    sx = AUTO_GRID_SIGMAS * math.sqrt(max(vx, 1e-12))
    sp = AUTO_GRID_SIGMAS * math.sqrt(max(vp, 1e-12))
    return mx - sx, mx + sx, mp - sp, mp + sp


def grid_for_density(rho: DensityMatrix, points: int = 129) -> PhaseGrid:
    """Grid sized from the operator moments of the state."""
    x_lo, x_hi, p_lo, p_hi = _operator_extents(rho)
    return PhaseGrid(x_min=x_lo, x_max=x_hi, p_min=p_lo, p_max=p_hi,
                     nx=points, np=points)


def grid_for_gaussian(gs: GaussianState, points: int = 129) -> PhaseGrid:
    sx = AUTO_GRID_SIGMAS * math.sqrt(gs.cov[0, 0])
    sp = AUTO_GRID_SIGMAS * math.sqrt(gs.cov[1, 1])
    return PhaseGrid(x_min=gs.mean[0] - sx, x_max=gs.mean[0] + sx,
                     p_min=gs.mean[1] - sp, p_max=gs.mean[1] + sp,
                     nx=points, np=points)


def wigner_from_density(rho_A: DensityMatrix, grid: PhaseGrid) -> WignerField:
    """Reconstruct W(X, P) from a field-mode density matrix.

    The double Fock sum is folded into one pass per diagonal so the
    Laguerre recurrence and the off-diagonal phase factor are shared by
    all elements with the same index offset.
    """
    if rho_A.space.n_qubits != 0:
        raise ValueError("wigner_from_density needs a field-only state; "
                         "trace out the qubits first")
    mat = rho_A.matrix
    d = rho_A.space.field_dim
    x_arr, p_arr = grid.mesh()
    r2 = x_arr**2 + p_arr**2
    decay = np.exp(-r2 / 2)
    with np.errstate(divide="ignore"):
        ln_r = 0.5 * np.log(r2)
    phase_unit = np.exp(-1j * np.arctan2(p_arr, x_arr))

    acc = np.zeros((grid.nx, grid.np), dtype=complex)
    for delta in range(d):
        lower = np.diagonal(mat, offset=-delta)  # rho[n + delta, n]
        upper = np.diagonal(mat, offset=delta)   # rho[n, n + delta]
        if np.max(np.abs(lower)) < 1e-18 and np.max(np.abs(upper)) < 1e-18:
            continue
        inner_lo = np.zeros_like(acc)
        inner_hi = np.zeros_like(acc) if delta else None
        lag_prev = np.ones_like(r2)
        lag_cur = None
        for n in range(d - delta):
            if n == 0:
                lag = lag_prev
            elif n == 1:
                lag_cur = delta + 1 - r2
                lag = lag_cur
            else:
                lag_prev, lag_cur = lag_cur, (
                    (2 * (n - 1) + delta + 1 - r2) * lag_cur
                    - (n - 1 + delta) * lag_prev) / n
                lag = lag_cur
            sign = -1.0 if n % 2 else 1.0
            coeff = sign / (2 * math.pi) * math.exp(
                0.5 * (math.lgamma(n + 1) - math.lgamma(n + delta + 1)))
            if abs(lower[n]) >= 1e-18:
                inner_lo += (coeff * lower[n]) * lag
            if delta and abs(upper[n]) >= 1e-18:
                inner_hi += (coeff * upper[n]) * lag
        if delta == 0:
            acc += inner_lo * decay
        else:
            radial = np.exp(delta * ln_r - r2 / 2)
            phase = phase_unit**delta
            acc += radial * (phase * inner_lo + np.conjugate(phase) * inner_hi)

    residue = float(np.max(np.abs(acc.imag)))
    if residue >= 1e-10:
        raise InvalidStateError(
            f"Wigner imaginary residue {residue:.3e}; input is not "
            "Hermitian enough")
    values = acc.real
    mass = float(values.sum()) * grid.cell_area
    if abs(mass - 1.0) > MASS_TOL:
        x_lo, x_hi, p_lo, p_hi = _operator_extents(rho_A)
        raise GridCoverageError(
            f"grid captures mass {mass:.6f}; suggest extents "
            f"x in [{x_lo:.2f}, {x_hi:.2f}], p in [{p_lo:.2f}, {p_hi:.2f}]")
    return WignerField(grid=grid, values=values, basis_tag=ModeBasis.MODE_A)


def gaussian_wigner(gs: GaussianState, grid: PhaseGrid) -> WignerField:
    """Exact Gaussian Wigner function on the grid."""
    det = float(np.linalg.det(gs.cov))
    vinv = np.linalg.inv(gs.cov)
    x_arr, p_arr = grid.mesh()
    dx = x_arr - gs.mean[0]
    dp = p_arr - gs.mean[1]
    quad = vinv[0, 0] * dx**2 + 2 * vinv[0, 1] * dx * dp + vinv[1, 1] * dp**2
    values = np.exp(-quad / 2) / (2 * math.pi * math.sqrt(det))
    return WignerField(grid=grid, values=values, basis_tag=ModeBasis.MODE_A)


def wigner_change_basis(w: WignerField, r: float,
                        grid: PhaseGrid | None = None) -> WignerField:
    """Re-express a squeezed-mode Wigner function for the bare mode.

    The two phase spaces are related by W_a(X_a, P_a) =
    W_A(e^r X_a, e^-r P_a).  With no grid given, the output grid is the
    image of the input one, so the sample points coincide and no
    interpolation is needed; a custom grid is resampled bilinearly and
    must map inside the source data.
    """
    if w.basis_tag is not ModeBasis.MODE_A:
        raise ValueError("input field must be in the squeezed-mode basis")
    g = w.grid
    if grid is None:
        out_grid = PhaseGrid(
            x_min=g.x_min * math.exp(-r), x_max=g.x_max * math.exp(-r),
            p_min=g.p_min * math.exp(r), p_max=g.p_max * math.exp(r),
            nx=g.nx, np=g.np)
        return WignerField(grid=out_grid, values=w.values,
                           basis_tag=ModeBasis.MODE_a, squeeze_r=r)
    xs = grid.x_centers * math.exp(r)
    ps = grid.p_centers * math.exp(-r)
    src_x, src_p = g.x_centers, g.p_centers
    if (xs[0] < src_x[0] or xs[-1] > src_x[-1]
            or ps[0] < src_p[0] or ps[-1] > src_p[-1]):
        raise GridCoverageError(
            "requested grid maps outside the source samples: need "
            f"x in [{src_x[0]:.2f}, {src_x[-1]:.2f}], "
            f"p in [{src_p[0]:.2f}, {src_p[-1]:.2f}] after scaling")
    interp = RegularGridInterpolator((src_x, src_p), np.asarray(w.values))
    mesh_x, mesh_p = np.meshgrid(xs, ps, indexing="ij")
    values = interp(np.stack([mesh_x.ravel(), mesh_p.ravel()], axis=-1))
    return WignerField(grid=grid, values=values.reshape(grid.nx, grid.np),
                       basis_tag=ModeBasis.MODE_a, squeeze_r=r)
