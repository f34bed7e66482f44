"""Uniform 2D Cartesian grid, node-centred scalar fields and finite-difference stencils.

Arrays are stored with shape ``(nx, ny)`` so that ``values[i, j]`` lives at
``(x0 + i*dx, y0 + j*dy)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BC(enum.Enum):
    ZERO_FLUX = "zero_flux"
    PINNED = "pinned"


# edge order used everywhere: (xmin, xmax, ymin, ymax)
EDGES = ("xmin", "xmax", "ymin", "ymax")


@dataclass(frozen=True)
class Grid2:
    nx: int
    ny: int
    dx: float
    dy: float
    origin: tuple[float, float] = (0.0, 0.0)
    bc: tuple[BC, BC, BC, BC] = (BC.ZERO_FLUX,) * 4

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 nodes per axis, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("grid spacing must be positive")
        if not np.isclose(self.dx, self.dy, rtol=1e-12, atol=0.0):
            raise ValueError("square cells required (dx == dy)")
        if len(self.bc) != 4:
            raise ValueError("bc must give one tag per edge (xmin, xmax, ymin, ymax)")

    @classmethod
    def from_extent(cls, xmin: float, xmax: float, ymin: float, ymax: float, h: float,
                    bc=(BC.ZERO_FLUX,) * 4) -> "Grid2":
        """Grid covering the box with spacing ``h``; the box must be a whole number of cells."""
        nxc = (xmax - xmin) / h
        nyc = (ymax - ymin) / h
        nx = int(round(nxc)) + 1
        ny = int(round(nyc)) + 1
        if abs(nxc - round(nxc)) > 1e-6 or abs(nyc - round(nyc)) > 1e-6:
            raise ValueError(f"extent is not a whole number of cells of size {h}")
        return cls(nx, ny, h, h, (xmin, ymin), tuple(bc))

    @property
    def h(self) -> float:
        return self.dx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + self.dy * np.arange(self.ny)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return (x0, x0 + (self.nx - 1) * self.dx, y0, y0 + (self.ny - 1) * self.dy)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays ``(X, Y)``, each of shape ``(nx, ny)``."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def node_of(self, x: float, y: float) -> tuple[int, int]:
        """Nearest node index to a physical point."""
        i = int(round((x - self.origin[0]) / self.dx))
        j = int(round((y - self.origin[1]) / self.dy))
        return min(max(i, 0), self.nx - 1), min(max(j, 0), self.ny - 1)

    def pinned_mask(self) -> np.ndarray:
        """Boolean mask of nodes lying on a Pinned edge."""
        mask = np.zeros(self.shape, dtype=bool)
        xmin, xmax, ymin, ymax = self.bc
        if xmin is BC.PINNED:
            mask[0, :] = True
        if xmax is BC.PINNED:
            mask[-1, :] = True
        if ymin is BC.PINNED:
            mask[:, 0] = True
        if ymax is BC.PINNED:
            mask[:, -1] = True
        return mask

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per grid node. The value array is made read-only on construction."""

    grid: Grid2
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != self.grid.shape:
            if v.size != self.grid.nx * self.grid.ny:
                raise ValueError(f"expected {self.grid.nx * self.grid.ny} values, got {v.size}")
            v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise FloatingPointError("scalar field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def __add__(self, other):
        o = other.values if isinstance(other, ScalarField) else other
        return self.with_values(self.values + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = other.values if isinstance(other, ScalarField) else other
        return self.with_values(self.values - o)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, scalar: float):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__


def _padded(v: np.ndarray) -> np.ndarray:
    # reflect mode mirrors about the edge node: ghost[-1] = v[1]
    return np.pad(v, 1, mode="reflect")


def laplacian_array(v: np.ndarray, grid: Grid2) -> np.ndarray:
    """5-point Laplacian with mirrored ghosts; zero on Pinned edges."""
    p = _padded(v)
    lap = (p[2:, 1:-1] + p[:-2, 1:-1] - 2.0 * v) / grid.dx**2 + (p[1:-1, 2:] + p[1:-1, :-2] - 2.0 * v) / grid.dy**2
    lap[grid.pinned_mask()] = 0.0
    return lap


def laplacian(f: ScalarField) -> ScalarField:
    return f.with_values(laplacian_array(f.values, f.grid))


def gradient_array(v: np.ndarray, grid: Grid2) -> tuple[np.ndarray, np.ndarray]:
    # np.gradient: central differences inside, first-order one-sided at the edges
    gx, gy = np.gradient(v, grid.dx, grid.dy, edge_order=1)
    return gx, gy


def gradient_norm(f: ScalarField) -> ScalarField:
    gx, gy = gradient_array(f.values, f.grid)
    return f.with_values(np.hypot(gx, gy))


def godunov_gradient_norm(f: ScalarField) -> ScalarField:
    """Upwind (Godunov) gradient magnitude, the discrete eikonal residual.

    Unlike central differences this stays close to 1 across the kinks of a
    distance function (medial ridges), so it is the right probe of the
    distance property. The upwind direction is chosen by the sign of ``f``.
    """
    v = f.values
    h = f.grid.dx
    p = np.pad(v, 1, mode="edge")
    dxm = (v - p[:-2, 1:-1]) / h
    dxp = (p[2:, 1:-1] - v) / h
    dym = (v - p[1:-1, :-2]) / h
    dyp = (p[1:-1, 2:] - v) / h
    # one-sided at the edges: drop the zero difference introduced by edge padding
    dxm[0, :] = dxp[0, :]
    dxp[-1, :] = dxm[-1, :]
    dym[:, 0] = dyp[:, 0]
    dyp[:, -1] = dym[:, -1]
    pos = v >= 0
    gx2 = np.where(pos,
                   np.maximum(np.maximum(dxm, 0.0) ** 2, np.minimum(dxp, 0.0) ** 2),
                   np.maximum(np.minimum(dxm, 0.0) ** 2, np.maximum(dxp, 0.0) ** 2))
    gy2 = np.where(pos,
                   np.maximum(np.maximum(dym, 0.0) ** 2, np.minimum(dyp, 0.0) ** 2),
                   np.maximum(np.minimum(dym, 0.0) ** 2, np.maximum(dyp, 0.0) ** 2))
    return f.with_values(np.sqrt(gx2 + gy2))


def bilinear(v: np.ndarray, grid: Grid2, x, y):
    """Bilinear interpolation of node values at physical points (clamped to the grid)."""
    fx = np.clip((np.asarray(x, dtype=float) - grid.origin[0]) / grid.dx, 0.0, grid.nx - 1.0)
    fy = np.clip((np.asarray(y, dtype=float) - grid.origin[1]) / grid.dy, 0.0, grid.ny - 1.0)
    i = np.minimum(np.floor(fx).astype(int), grid.nx - 2)
    j = np.minimum(np.floor(fy).astype(int), grid.ny - 2)
    tx = fx - i
    ty = fy - j
    return ((1 - tx) * (1 - ty) * v[i, j] + tx * (1 - ty) * v[i + 1, j]
            + (1 - tx) * ty * v[i, j + 1] + tx * ty * v[i + 1, j + 1])


def write_vtk(path, grid: Grid2, fields: dict[str, np.ndarray], title: str = "lsjunction fields") -> None:
    """Legacy VTK STRUCTURED_POINTS (ASCII), one SCALARS block per named field.

    VTK point order runs x fastest, so arrays are written transposed.
    """
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx} {grid.ny} 1",
        f"ORIGIN {grid.origin[0]:.12g} {grid.origin[1]:.12g} 0",
        f"SPACING {grid.dx:.12g} {grid.dy:.12g} 1",
        f"POINT_DATA {grid.nx * grid.ny}",
    ]
    for name, values in fields.items():
        v = np.asarray(values, dtype=float)
        if v.shape != grid.shape:
            raise ValueError(f"field {name!r} has shape {v.shape}, grid is {grid.shape}")
        lines.append(f"SCALARS {name.replace(' ', '_')} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(" ".join(f"{x:.10g}" for x in row) for row in v.T)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_field_csv(path, f: ScalarField) -> None:
    """Flat CSV with columns i, j, x, y, value."""
    g = f.grid
    X, Y = g.coords()
    I, J = np.meshgrid(np.arange(g.nx), np.arange(g.ny), indexing="ij")
    with open(path, "w") as fh:
        fh.write("i,j,x,y,value\n")
        for row in zip(I.ravel(), J.ravel(), X.ravel(), Y.ravel(), f.values.ravel()):
            fh.write(f"{row[0]},{row[1]},{row[2]:.12g},{row[3]:.12g},{row[4]:.12g}\n")
