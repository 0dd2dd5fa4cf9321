"""Cartesian primal grid and the dual grid of interaction regions.

Cell ``(i, j)`` has flat index ``j * nx + i``.  The interaction region anchored
at cell ``(i, j)`` has vertices (cell centers) numbered counterclockwise from
the bottom left::

    v4 = (i, j+1) ---- v3 = (i+1, j+1)
        |                 |
    v1 = (i, j)   ---- v2 = (i+1, j)

and half interface ``k`` (``k + 1/2`` in 1-based notation) joins vertex ``k``
to vertex ``k + 1`` (cyclic).  A positive half flux goes from ``k`` to
``k + 1``.  Only interior 2x2 stencils get a region, so faces on the outer ring
of cells carry one half interface instead of two.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .units import DARCY, THICKNESS


class InvalidGridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CartesianGrid:
    nx: int
    ny: int
    dx: float
    dy: float
    x0: float
    y0: float
    perm: np.ndarray
    poro: np.ndarray
    depth: np.ndarray
    thickness: float = THICKNESS

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def cell_volume(self):
        return np.full(self.n_cells, self.dx * self.dy * self.thickness)

    @property
    def pore_volume(self):
        return self.cell_volume * self.poro

    def cell_centers(self):
        xc = self.x0 + (np.arange(self.nx) + 0.5) * self.dx
        yc = self.y0 + (np.arange(self.ny) + 0.5) * self.dy
        X, Y = np.meshgrid(xc, yc)
        return X.ravel(), Y.ravel()

    def index(self, i, j):
        return j * self.nx + i

    def locate(self, x, y):
        """Flat index of the cell containing (or nearest to) point ``(x, y)``."""
        i = int(np.clip(np.floor((x - self.x0) / self.dx), 0, self.nx - 1))
        j = int(np.clip(np.floor((y - self.y0) / self.dy), 0, self.ny - 1))
        return self.index(i, j)

    def face_neighbors(self, c):
        i, j = c % self.nx, c // self.nx
        out = []
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ii, jj = i + di, j + dj
            if 0 <= ii < self.nx and 0 <= jj < self.ny:
                out.append(self.index(ii, jj))
        return out


def _sample(field_, X, Y, n):
    if callable(field_):
        v = np.asarray(field_(X, Y), dtype=float)
        return np.broadcast_to(v, (n,)).copy()
    v = np.asarray(field_, dtype=float)
    if v.ndim == 0:
        return np.full(n, float(v))
    v = v.ravel()
    if v.size != n:
        raise InvalidGridError(f"field has {v.size} values, expected {n}")
    return v.copy()


def build_grid(nx, ny, extents, perm, poro=1.0, depth=0.0, thickness=THICKNESS):
    """Sample field closures (or constants/arrays) at cell centers.

    ``extents`` is ``(xmin, xmax, ymin, ymax)`` in ft.  ``perm`` is in mD and
    ``depth`` in ft (positive downward).
    """
    if nx < 2 or ny < 2:
        raise InvalidGridError("need at least 2x2 cells")
    xmin, xmax, ymin, ymax = extents
    if not (xmax > xmin and ymax > ymin):
        raise InvalidGridError("extents must be positive")
    if thickness <= 0:
        raise InvalidGridError("thickness must be positive")
    dx = (xmax - xmin) / nx
    dy = (ymax - ymin) / ny
    xc = xmin + (np.arange(nx) + 0.5) * dx
    yc = ymin + (np.arange(ny) + 0.5) * dy
    X, Y = (a.ravel() for a in np.meshgrid(xc, yc))
    n = nx * ny
    k = _sample(perm, X, Y, n)
    phi = _sample(poro, X, Y, n)
    z = _sample(depth, X, Y, n)
    if np.any(k <= 0):
        raise InvalidGridError("permeability must be positive")
    if np.any((phi <= 0) | (phi > 1)):
        raise InvalidGridError("porosity must be in (0, 1]")
    return CartesianGrid(nx, ny, dx, dy, xmin, ymin, k, phi, z, thickness)


def half_transmissibility(k_a, k_b, l_half, d):
    """TPFA transmissibility of a half interface (harmonic permeability mean).

    ``2 l / (d (1/k_a + 1/k_b))`` written as ``2 l k_a k_b / (d (k_a + k_b))``.
    """
    k_a = np.asarray(k_a, dtype=float)
    k_b = np.asarray(k_b, dtype=float)
    if np.any(k_a <= 0) or np.any(k_b <= 0):
        raise InvalidGridError("degenerate permeability")
    return 2.0 * l_half * k_a * k_b / (d * (k_a + k_b))


def rotate_coords(x, y, theta):
    c, s = np.cos(theta), np.sin(theta)
    return x * c + y * s, -x * s + y * c


# outward normals of half interfaces 0..3 and the cell-owner pattern:
# vertex v sees +F[v] (outflow) and -F[v-1] (inflow)
HALF_NORMALS = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
OWNER = np.eye(4) - np.roll(np.eye(4), -1, axis=1)


@dataclass(frozen=True)
class InteractionRegion:
    vertex_cells: np.ndarray
    half_T: np.ndarray
    half_dz: np.ndarray
    normals: np.ndarray = field(default_factory=lambda: HALF_NORMALS)
    owner: np.ndarray = field(default_factory=lambda: OWNER)


@dataclass(frozen=True, eq=False)
class DualGrid:
    """All interior interaction regions, stored as arrays of shape (R, 4).

    ``half_T`` already includes the Darcy unit constant and the thickness, so
    ``half_T * lam * dPhi`` is a rate in ft^3/day.  ``half_T_geo`` is the bare
    geometric value in mD.
    """

    grid: CartesianGrid
    cells: np.ndarray
    half_T: np.ndarray
    half_T_geo: np.ndarray
    half_dz: np.ndarray

    def __len__(self):
        return self.cells.shape[0]

    def __getitem__(self, r):
        return InteractionRegion(self.cells[r], self.half_T[r], self.half_dz[r])

    def __iter__(self):
        for r in range(len(self)):
            yield self[r]

    def regions_of_cell(self, c):
        return np.nonzero(np.any(self.cells == c, axis=1))[0]


def build_dual(grid):
    nx, ny = grid.nx, grid.ny
    I, J = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1))
    I, J = I.ravel(), J.ravel()
    cells = np.stack(
        [J * nx + I, J * nx + I + 1, (J + 1) * nx + I + 1, (J + 1) * nx + I], axis=1
    )
    nb = np.roll(cells, -1, axis=1)
    # interfaces 0 and 2 join x-neighbours, 1 and 3 join y-neighbours
    l_half = np.array([grid.dy, grid.dx, grid.dy, grid.dx]) / 2.0
    dist = np.array([grid.dx, grid.dy, grid.dx, grid.dy])
    T_geo = half_transmissibility(grid.perm[cells], grid.perm[nb], l_half, dist)
    dz = grid.depth[nb] - grid.depth[cells]
    return DualGrid(grid, cells, T_geo * DARCY * grid.thickness, T_geo, dz)


def load_array_file(path, n=None):
    """Read a plain-text array (row-major, whitespace/comma separated, '#' comments)."""
    text = Path(path).read_text()
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].replace(",", " ")
        tokens.extend(line.split())
    arr = np.array([float(t) for t in tokens])
    if n is not None and arr.size != n:
        raise InvalidGridError(f"{path}: {arr.size} values, expected {n}")
    return arr
