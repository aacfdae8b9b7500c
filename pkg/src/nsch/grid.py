"""Uniform-grid discrete calculus on a rectangle.

The domain is a rectangle [0, lx] x [0, ly] covered by nx*ny equal cells in
a marker-and-cell (MAC) layout:

* scalars (phase field, chemical potentials, pressure, ...) live at cell
  centers ((i+1/2)hx, (j+1/2)hy) and carry homogeneous Neumann conditions,
  realized by mirror ghost cells;
* vector fields (velocity, controls, body forces) live on cell faces:
  x-components at (i*hx, (j+1/2)hy), y-components at ((i+1/2)hx, j*hy),
  with no-slip walls (zero normal face values, reflected tangential ghosts).

With this layout the 5-point Laplacian factors exactly as
``laplacian = divergence_of_faces o gradient_to_faces`` and those two
operators are exact negative transposes of each other in the uniform
cell/face inner products, which the conservation tests rely on.

Neumann elliptic operators are diagonalized by the type-II discrete cosine
transform: the eigenvalue of the 5-point mirror Laplacian on the (j, k)
cosine mode is

    lambda_{jk} = -[(2 - 2 cos(pi j / nx)) / hx^2 + (2 - 2 cos(pi k / ny)) / hy^2]

which is nonpositive and vanishes only on the constant (0, 0) mode.  All
pure-derivative solves fix that gauge mode by returning the zero-mean
solution.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .errors import IncompatibleMeanError, SingularSymbolError

# Worker count for scipy.fft calls; overridable through the NSCH_THREADS
# environment variable (read once at import, deterministic per run).
_FFT_WORKERS = int(os.environ.get("NSCH_THREADS", "1"))


def fft_workers() -> int:
    return _FFT_WORKERS


def set_fft_workers(n: int) -> None:
    global _FFT_WORKERS
    if n < 1:
        raise ValueError("worker count must be at least 1")
    _FFT_WORKERS = n


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid: nx*ny cells on [0, lx] x [0, ly]."""

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid must have at least 4x4 cells, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain edge lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy

    @property
    def volume(self) -> float:
        """Measure of the whole domain."""
        return self.lx * self.ly

    def cell_centers(self):
        """Return (X, Y) arrays of shape (nx, ny) with cell-center coordinates."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")


@dataclass
class ScalarField:
    """Cell-centered scalar field; ``values`` has shape (nx, ny)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(
                f"scalar field shape {self.values.shape} does not match grid "
                f"({self.grid.nx}, {self.grid.ny})"
            )

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros((grid.nx, grid.ny)))

    @classmethod
    def full(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full((grid.nx, grid.ny), float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ScalarField":
        X, Y = grid.cell_centers()
        return cls(grid, np.asarray(fn(X, Y), dtype=float))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def mean(self) -> float:
        return float(self.values.mean())

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def norm_l2(self) -> float:
        """Discrete L2 norm, sqrt(sum f^2 * cell_volume)."""
        return float(np.sqrt((self.values**2).sum() * self.grid.cell_volume))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values - other.values)

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.values * other.values)
        return ScalarField(self.grid, self.values * float(other))

    __rmul__ = __mul__


@dataclass
class FaceField:
    """Staggered vector field: x on (nx+1, ny) x-faces, y on (nx, ny+1) y-faces."""

    grid: GridSpec
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != (self.grid.nx + 1, self.grid.ny):
            raise ValueError(f"x-face shape {self.x.shape} does not match grid")
        if self.y.shape != (self.grid.nx, self.grid.ny + 1):
            raise ValueError(f"y-face shape {self.y.shape} does not match grid")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "FaceField":
        return cls(grid, np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    def copy(self) -> "FaceField":
        return FaceField(self.grid, self.x.copy(), self.y.copy())

    def zero_boundary_normal(self) -> "FaceField":
        """Return a copy with vanishing normal components on the walls."""
        out = self.copy()
        out.x[0, :] = 0.0
        out.x[-1, :] = 0.0
        out.y[:, 0] = 0.0
        out.y[:, -1] = 0.0
        return out

    def norm_l2(self) -> float:
        """Discrete L2 norm; see :func:`face_inner` for the quadrature."""
        return float(np.sqrt(face_inner(self, self)))

    def max_abs(self) -> float:
        return float(max(np.abs(self.x).max(), np.abs(self.y).max()))

    def __add__(self, other: "FaceField") -> "FaceField":
        return FaceField(self.grid, self.x + other.x, self.y + other.y)

    def __sub__(self, other: "FaceField") -> "FaceField":
        return FaceField(self.grid, self.x - other.x, self.y - other.y)

    def __neg__(self) -> "FaceField":
        return FaceField(self.grid, -self.x, -self.y)

    def __mul__(self, scalar) -> "FaceField":
        return FaceField(self.grid, self.x * float(scalar), self.y * float(scalar))

    __rmul__ = __mul__


@dataclass
class SpectralCoeffs:
    """Cosine-mode amplitudes of a scalar field.

    ``coeffs[j, k]`` multiplies the separable mode
    cos(pi j (i+1/2)/nx) * cos(pi k (l+1/2)/ny); the (0, 0) amplitude equals
    the field mean.
    """

    grid: GridSpec
    coeffs: np.ndarray
    eigenvalues: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid "
                f"({self.grid.nx}, {self.grid.ny})"
            )
        if self.eigenvalues is None:
            self.eigenvalues = laplacian_eigenvalues(self.grid)


_EIG_CACHE: dict = {}


def laplacian_eigenvalues(grid: GridSpec) -> np.ndarray:
    """Eigenvalues of the 5-point Neumann Laplacian on the cosine basis.

    lambda_{jk} <= 0 with equality exactly at the constant (0, 0) mode.
    """
    key = (grid.nx, grid.ny, grid.lx, grid.ly)
    lam = _EIG_CACHE.get(key)
    if lam is None:
        lx = -(2.0 - 2.0 * np.cos(np.pi * np.arange(grid.nx) / grid.nx)) / grid.hx**2
        ly = -(2.0 - 2.0 * np.cos(np.pi * np.arange(grid.ny) / grid.ny)) / grid.hy**2
        lam = lx[:, None] + ly[None, :]
        lam[0, 0] = 0.0
        _EIG_CACHE[key] = lam
    return lam


def _amplitude_weights(grid: GridSpec) -> np.ndarray:
    # converts orthonormal DCT-II coefficients to modal amplitudes
    key = ("amp", grid.nx, grid.ny)
    w = _EIG_CACHE.get(key)
    if w is None:
        rx = np.full(grid.nx, np.sqrt(2.0 / grid.nx))
        rx[0] = np.sqrt(1.0 / grid.nx)
        ry = np.full(grid.ny, np.sqrt(2.0 / grid.ny))
        ry[0] = np.sqrt(1.0 / grid.ny)
        w = rx[:, None] * ry[None, :]
        _EIG_CACHE[key] = w
    return w


def cosine_transform(f: ScalarField) -> SpectralCoeffs:
    """Forward even-symmetric (DCT-II) transform to modal amplitudes."""
    w = _amplitude_weights(f.grid)
    c = fft.dctn(f.values, type=2, norm="ortho", workers=fft_workers()) * w
    return SpectralCoeffs(f.grid, c)


def inverse_cosine_transform(c: SpectralCoeffs) -> ScalarField:
    """Inverse of :func:`cosine_transform`; round trip is exact to roundoff."""
    w = _amplitude_weights(c.grid)
    v = fft.idctn(c.coeffs / w, type=2, norm="ortho", workers=fft_workers())
    return ScalarField(c.grid, v)


def _pad_mirror(values: np.ndarray) -> np.ndarray:
    # mirror ghost layer: realizes homogeneous Neumann walls
    return np.pad(values, 1, mode="edge")


def laplacian(f: ScalarField) -> ScalarField:
    """5-point Laplacian with mirror ghost cells; output has zero mean."""
    g = _pad_mirror(f.values)
    hx2, hy2 = f.grid.hx**2, f.grid.hy**2
    lap = (g[:-2, 1:-1] - 2.0 * g[1:-1, 1:-1] + g[2:, 1:-1]) / hx2
    lap += (g[1:-1, :-2] - 2.0 * g[1:-1, 1:-1] + g[1:-1, 2:]) / hy2
    return ScalarField(f.grid, lap)


def gradient_to_faces(f: ScalarField) -> FaceField:
    """Centered face differences; boundary-face normal components are zero."""
    grid = f.grid
    gx = np.zeros((grid.nx + 1, grid.ny))
    gy = np.zeros((grid.nx, grid.ny + 1))
    gx[1:-1, :] = (f.values[1:, :] - f.values[:-1, :]) / grid.hx
    gy[:, 1:-1] = (f.values[:, 1:] - f.values[:, :-1]) / grid.hy
    return FaceField(grid, gx, gy)


def divergence_of_faces(w: FaceField) -> ScalarField:
    """Per-cell net flux divided by the cell volume."""
    grid = w.grid
    div = (w.x[1:, :] - w.x[:-1, :]) / grid.hx + (w.y[:, 1:] - w.y[:, :-1]) / grid.hy
    return ScalarField(grid, div)


def apply_poly_laplacian(a0: float, a1: float, a2: float, a3: float, f: ScalarField) -> ScalarField:
    """Apply a0*I + a1*(-Lap) + a2*Lap^2 + a3*(-Lap)^3 by repeated stencils."""
    out = a0 * f.values
    if a1 or a2 or a3:
        l1 = laplacian(f)
        out = out - a1 * l1.values
        if a2 or a3:
            l2 = laplacian(l1)
            out = out + a2 * l2.values
            if a3:
                l3 = laplacian(l2)
                out = out - a3 * l3.values
    return ScalarField(f.grid, out)


def helmholtz_poly_solve(
    a0: float, a1: float, a2: float, a3: float, rhs: ScalarField, check_mean: bool = True
) -> ScalarField:
    """Solve (a0*I + a1*(-Lap) + a2*Lap^2 + a3*(-Lap)^3) x = rhs spectrally.

    The symbol must be nonzero on every nonconstant mode.  If it vanishes on
    the constant mode the right-hand side must have (numerically) zero mean
    and the zero-mean solution is returned.  ``check_mean=False`` silently
    drops the gauge mode instead (for callers that guarantee compatibility
    analytically and only feed roundoff into the mean).

    Raises
    ------
    SingularSymbolError
        If the symbol vanishes on a nonconstant mode.
    IncompatibleMeanError
        If the constant-mode symbol is zero but mean(rhs) is not.
    """
    lam = laplacian_eigenvalues(rhs.grid)
    symbol = a0 + a1 * (-lam) + a2 * lam**2 + a3 * (-lam) ** 3
    scale = np.abs(symbol).max()
    tiny = 1e-14 * max(scale, 1.0)
    singular = np.abs(symbol) <= tiny
    if singular[1:, :].any() or singular[0, 1:].any():
        raise SingularSymbolError(
            f"singular symbol: coefficients ({a0}, {a1}, {a2}, {a3}) vanish on a nonzero mode"
        )
    c = cosine_transform(rhs)
    if singular[0, 0]:
        rhs_norm = rhs.norm_l2()
        if check_mean and abs(c.coeffs[0, 0]) > 1e-10 * max(rhs_norm, 1e-300):
            raise IncompatibleMeanError(
                f"incompatible mean: |mean(rhs)|={abs(c.coeffs[0, 0]):.3e} with a "
                "pure-derivative operator; right-hand side must have zero mean"
            )
        sym = symbol.copy()
        sym[0, 0] = 1.0
        coeffs = c.coeffs / sym
        coeffs[0, 0] = 0.0
    else:
        coeffs = c.coeffs / symbol
    return inverse_cosine_transform(SpectralCoeffs(rhs.grid, coeffs))


def poisson_neumann(rhs: ScalarField, check_mean: bool = True) -> ScalarField:
    """Zero-mean solution of -Lap p = rhs; rhs must have compatible (zero) mean."""
    return helmholtz_poly_solve(0.0, 1.0, 0.0, 0.0, rhs, check_mean=check_mean)


def advect_scalar(v: FaceField, f: ScalarField) -> ScalarField:
    """Conservative transport term div(v f) with centered face interpolation.

    Boundary faces carry zero flux, so the discrete mean of the output is
    exactly zero for any no-slip v; with div v = 0 this is the discrete
    form of v . grad f.
    """
    grid = f.grid
    fx = np.zeros((grid.nx + 1, grid.ny))
    fy = np.zeros((grid.nx, grid.ny + 1))
    fx[1:-1, :] = v.x[1:-1, :] * 0.5 * (f.values[1:, :] + f.values[:-1, :])
    fy[:, 1:-1] = v.y[:, 1:-1] * 0.5 * (f.values[:, 1:] + f.values[:, :-1])
    return divergence_of_faces(FaceField(grid, fx, fy))


def project_divergence_free(v: FaceField, dt: float) -> tuple[FaceField, ScalarField]:
    """Leray projection: return (v - dt*grad p, p) with div of the result ~ 0.

    The pressure p is the zero-mean solution of the face-consistent Poisson
    problem, so the projected field is discretely divergence-free to solver
    precision and the projection is idempotent.  The divergence mean is
    exactly zero for fields with no normal boundary flux, so the gauge mode
    carries only roundoff and is dropped without a compatibility check.
    """
    div = divergence_of_faces(v)
    p = poisson_neumann(ScalarField(v.grid, -div.values / dt), check_mean=False)
    return v - dt * gradient_to_faces(p), p


def scalar_inner(f: ScalarField, g: ScalarField) -> float:
    """Discrete L2(Omega) inner product of cell fields."""
    return float((f.values * g.values).sum() * f.grid.cell_volume)


def face_inner(a: FaceField, b: FaceField) -> float:
    """Discrete L2(Omega) inner product of face fields.

    Faces carry weight hx*hy except the boundary normal faces, which carry
    half of it (each borders only one cell).  Fields with no-slip walls are
    insensitive to the boundary weight; constant fields integrate exactly.
    """
    vol = a.grid.cell_volume
    px = a.x * b.x
    py = a.y * b.y
    total = px[1:-1, :].sum() + 0.5 * (px[0, :].sum() + px[-1, :].sum())
    total += py[:, 1:-1].sum() + 0.5 * (py[:, 0].sum() + py[:, -1].sum())
    return float(total * vol)
