"""Marching squares on node-centred fields.

Cells are ``(i, j)`` with corners ``(i, j), (i+1, j), (i+1, j+1), (i, j+1)``.
A node is "inside" when its value is > 0. Crossing points are placed on grid
edges by linear interpolation; saddle cells are split according to the sign
of the cell-centre average.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .grid import Grid2, ScalarField


class NoInterfaceError(ValueError):
    """Raised when a field has no sign change, hence no zero contour."""


@numba.njit(cache=True)
def _crossing(v0, v1):
    d = v0 - v1
    if d == 0.0:
        return 0.5
    t = v0 / d
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return t


@numba.njit(cache=True)
def _second_diff(v, i, j, di, dj):
    # centred second difference at (i, j) along (di, dj); nan at the grid edge
    nx, ny = v.shape
    if i - di < 0 or j - dj < 0 or i + di >= nx or j + dj >= ny:
        return np.nan
    return v[i - di, j - dj] - 2.0 * v[i, j] + v[i + di, j + dj]


@numba.njit(cache=True)
def _edge_crossing(v, i, j, di, dj, quad):
    """Fraction along the edge (i, j) -> (i + di, j + dj) where the field vanishes.

    Linear by default. With ``quad`` the edge profile is a parabola whose
    curvature is the minmod of the second differences at both ends, which
    puts the crossing of a smooth field second-order accurately.
    """
    v0 = v[i, j]
    v1 = v[i + di, j + dj]
    t = _crossing(v0, v1)
    if not quad:
        return t
    d0 = _second_diff(v, i, j, di, dj)
    d1 = _second_diff(v, i + di, j + dj, di, dj)
    if np.isnan(d0):
        d = d1
    elif np.isnan(d1):
        d = d0
    elif d0 * d1 <= 0.0:
        d = 0.0
    else:
        d = d0 if abs(d0) < abs(d1) else d1
    if np.isnan(d):
        return t
    c2 = 0.5 * d
    c1 = v1 - v0 - c2
    if abs(c2) <= 1e-12 * (abs(c1) + 1e-300):
        return t
    disc = c1 * c1 - 4.0 * c2 * v0
    if disc < 0.0:
        return t
    # numerically stable roots of c2 t^2 + c1 t + v0
    q = -0.5 * (c1 + np.sqrt(disc)) if c1 >= 0.0 else -0.5 * (c1 - np.sqrt(disc))
    best = t
    found = False
    for r in (q / c2, v0 / q if q != 0.0 else np.inf):
        if 0.0 <= r <= 1.0 and (not found or abs(r - t) < abs(best - t)):
            best = r
            found = True
    return best


@numba.njit(cache=True)
def cell_segments(v, ilo, ihi, jlo, jhi, quad=False):
    """Zero-level segments of cells ``ilo <= i < ihi``, ``jlo <= j < jhi`` (grid units).

    Returns ``(seg, eid, cell)``: ``seg[k] = (fx0, fy0, fx1, fy1)`` in fractional
    node coordinates, ``eid[k]`` the two global grid-edge ids carrying the
    endpoints, ``cell[k]`` the owning cell ``(i, j)``. Crossings are linear
    along each edge unless ``quad`` asks for the parabolic correction.
    """
    nx, ny = v.shape
    cap = 64
    seg = np.empty((cap, 4))
    eid = np.empty((cap, 2), dtype=np.int64)
    cell = np.empty((cap, 2), dtype=np.int64)
    n = 0
    px = np.empty(4)
    py = np.empty(4)
    pe = np.empty(4, dtype=np.int64)
    has = np.zeros(4, dtype=np.bool_)
    for i in range(ilo, ihi):
        for j in range(jlo, jhi):
            a = v[i, j]
            b = v[i + 1, j]
            c = v[i + 1, j + 1]
            d = v[i, j + 1]
            sa = a > 0.0
            sb = b > 0.0
            sc = c > 0.0
            sd = d > 0.0
            if sa == sb and sb == sc and sc == sd:
                continue
            for k in range(4):
                has[k] = False
            # edge 0: bottom a-b (horizontal edge id of node (i, j))
            if sa != sb:
                t = _edge_crossing(v, i, j, 1, 0, quad)
                px[0] = i + t
                py[0] = j
                pe[0] = 2 * (i * ny + j)
                has[0] = True
            # edge 1: right b-c (vertical edge of node (i+1, j))
            if sb != sc:
                t = _edge_crossing(v, i + 1, j, 0, 1, quad)
                px[1] = i + 1
                py[1] = j + t
                pe[1] = 2 * ((i + 1) * ny + j) + 1
                has[1] = True
            # edge 2: top d-c (horizontal edge of node (i, j+1))
            if sd != sc:
                t = _edge_crossing(v, i, j + 1, 1, 0, quad)
                px[2] = i + t
                py[2] = j + 1
                pe[2] = 2 * (i * ny + j + 1)
                has[2] = True
            # edge 3: left a-d (vertical edge of node (i, j))
            if sa != sd:
                t = _edge_crossing(v, i, j, 0, 1, quad)
                px[3] = i
                py[3] = j + t
                pe[3] = 2 * (i * ny + j) + 1
                has[3] = True
            if n + 2 > cap:
                cap *= 2
                seg2 = np.empty((cap, 4))
                seg2[:n] = seg[:n]
                seg = seg2
                eid2 = np.empty((cap, 2), dtype=np.int64)
                eid2[:n] = eid[:n]
                eid = eid2
                cell2 = np.empty((cap, 2), dtype=np.int64)
                cell2[:n] = cell[:n]
                cell = cell2
            if has[0] and has[1] and has[2] and has[3]:
                centre = 0.25 * (a + b + c + d) > 0.0
                if centre == sa:
                    # a and c connected through the centre: cut off corners b and d
                    pairs = ((0, 1), (2, 3))
                else:
                    pairs = ((3, 0), (1, 2))
                for p in pairs:
                    k0 = p[0]
                    k1 = p[1]
                    seg[n, 0] = px[k0]
                    seg[n, 1] = py[k0]
                    seg[n, 2] = px[k1]
                    seg[n, 3] = py[k1]
                    eid[n, 0] = pe[k0]
                    eid[n, 1] = pe[k1]
                    cell[n, 0] = i
                    cell[n, 1] = j
                    n += 1
            else:
                k0 = -1
                k1 = -1
                for k in range(4):
                    if has[k]:
                        if k0 < 0:
                            k0 = k
                        else:
                            k1 = k
                if k1 < 0:
                    continue
                seg[n, 0] = px[k0]
                seg[n, 1] = py[k0]
                seg[n, 2] = px[k1]
                seg[n, 3] = py[k1]
                eid[n, 0] = pe[k0]
                eid[n, 1] = pe[k1]
                cell[n, 0] = i
                cell[n, 1] = j
                n += 1
    return seg[:n], eid[:n], cell[:n]


@dataclass
class Contour:
    """Zero-level polylines of a field, in physical coordinates."""

    polylines: list[np.ndarray] = field(default_factory=list)
    closed: list[bool] = field(default_factory=list)

    def __len__(self):
        return len(self.polylines)

    def points(self) -> np.ndarray:
        if not self.polylines:
            return np.empty((0, 2))
        return np.concatenate(self.polylines)


def _chain(eid: np.ndarray) -> list[tuple[list[int], bool]]:
    """Order segments into chains by shared grid-edge ids. Returns (vertex edge ids, closed)."""
    touching: dict[int, list[int]] = {}
    for k, (e0, e1) in enumerate(eid):
        touching.setdefault(int(e0), []).append(k)
        touching.setdefault(int(e1), []).append(k)
    used = np.zeros(len(eid), dtype=bool)

    def walk(k, e_from):
        # follow from segment k leaving through the end not equal to e_from
        out = []
        while True:
            used[k] = True
            e0, e1 = int(eid[k, 0]), int(eid[k, 1])
            e_next = e1 if e0 == e_from else e0
            out.append((k, e_next))
            nxt = [s for s in touching[e_next] if not used[s]]
            if not nxt:
                return out, e_next
            k, e_from = nxt[0], e_next

    chains = []
    # open chains first: start at edges touched by a single segment
    starts = [e for e, segs in touching.items() if len(segs) == 1]
    for e in sorted(starts):
        k = touching[e][0]
        if used[k]:
            continue
        steps, _ = walk(k, e)
        chains.append(([e] + [en for _, en in steps], [k for k, _ in steps], False))
    for k in range(len(eid)):
        if used[k]:
            continue
        e_start = int(eid[k, 0])
        steps, e_end = walk(k, e_start)
        closed = e_end == e_start
        chains.append(([e_start] + [en for _, en in steps], [kk for kk, _ in steps], closed))
    return chains


def extract_contour(f: ScalarField | np.ndarray, grid: Grid2 | None = None) -> Contour:
    """Zero contour of a field as ordered polylines (physical coordinates)."""
    if isinstance(f, ScalarField):
        grid, v = f.grid, f.values
    else:
        v = np.asarray(f, dtype=float)
    if not (np.any(v > 0) and np.any(v <= 0)):
        raise NoInterfaceError("field has uniform sign: no zero contour")
    seg, eid, _ = cell_segments(v, 0, grid.nx - 1, 0, grid.ny - 1)
    if len(seg) == 0:
        raise NoInterfaceError("field has no zero crossing between nodes")
    # map edge id -> physical point
    pts: dict[int, tuple[float, float]] = {}
    for k in range(len(seg)):
        pts[int(eid[k, 0])] = (seg[k, 0], seg[k, 1])
        pts[int(eid[k, 1])] = (seg[k, 2], seg[k, 3])
    x0, y0 = grid.origin
    contour = Contour()
    for edges, _, closed in _chain(eid):
        if closed:
            edges = edges[:-1]
        p = np.array([pts[e] for e in edges], dtype=float)
        p[:, 0] = x0 + p[:, 0] * grid.dx
        p[:, 1] = y0 + p[:, 1] * grid.dy
        contour.polylines.append(p)
        contour.closed.append(closed)
    return contour


def crossing_points(v: np.ndarray, grid: Grid2, box=None) -> np.ndarray:
    """Unordered zero-crossing points on grid edges, optionally within an index box ``(ilo, ihi, jlo, jhi)``."""
    if box is None:
        box = (0, grid.nx - 1, 0, grid.ny - 1)
    ilo, ihi, jlo, jhi = box
    seg, eid, _ = cell_segments(v, max(ilo, 0), min(ihi, grid.nx - 1), max(jlo, 0), min(jhi, grid.ny - 1))
    if len(seg) == 0:
        return np.empty((0, 2))
    p = np.concatenate([seg[:, :2], seg[:, 2:]])
    ids = np.concatenate([eid[:, 0], eid[:, 1]])
    _, first = np.unique(ids, return_index=True)
    p = p[np.sort(first)]
    return np.column_stack([grid.origin[0] + p[:, 0] * grid.dx, grid.origin[1] + p[:, 1] * grid.dy])


def polygon_area(p: np.ndarray) -> float:
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
