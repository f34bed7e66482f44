"""Per-grain level-set functions: construction, redistancing and interface geometry.

Sign convention: a grain's function is positive inside the grain, negative
outside, zero on its boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.ndimage import convolve1d

from .contour import NoInterfaceError, cell_segments
from .grid import Grid2, ScalarField, laplacian_array


_BINOMIAL = np.array([0.25, 0.5, 0.25])


@dataclass(frozen=True)
class InterfaceGeometry:
    """Boundary polylines of a grain plus a polygon used for the inside test.

    ``region`` may extend beyond the computational domain; only its interior
    matters. ``boundary`` lists the pieces of the grain boundary that count as
    interfaces (domain walls are simply left out).
    """

    boundary: tuple[np.ndarray, ...]
    region: np.ndarray

    def __post_init__(self):
        segs = []
        for line in self.boundary:
            line = np.asarray(line, dtype=float)
            if line.ndim != 2 or line.shape[1] != 2 or len(line) < 2:
                raise ValueError("each boundary polyline needs at least two (x, y) points")
            seglen = np.hypot(*np.diff(line, axis=0).T)
            if np.any(seglen <= 1e-14):
                raise ValueError("degenerate geometry: zero-length boundary segment")
            segs.append(line)
        object.__setattr__(self, "boundary", tuple(segs))
        object.__setattr__(self, "region", np.asarray(self.region, dtype=float))

    def segments(self) -> np.ndarray:
        return np.concatenate([np.column_stack([b[:-1], b[1:]]) for b in self.boundary])

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return points_in_polygon(x, y, self.region)


def circle_geometry(cx: float, cy: float, r: float, n: int = 2048) -> InterfaceGeometry:
    t = np.linspace(0.0, 2 * np.pi, n + 1)
    p = np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)])
    return InterfaceGeometry((p,), p[:-1])


def points_in_polygon(x: np.ndarray, y: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule point-in-polygon test, vectorized over points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = np.zeros(x.shape, dtype=bool)
    px, py = poly[:, 0], poly[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    for ax, ay, bx, by in zip(px, py, qx, qy):
        if ay == by:
            continue
        straddle = (ay > y) != (by > y)
        xcross = ax + (y - ay) * (bx - ax) / (by - ay)
        inside ^= straddle & (x < xcross)
    return inside


def distance_to_segments(x: np.ndarray, y: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from points to the nearest of a set of segments."""
    best = np.full(np.shape(x), np.inf)
    for ax, ay, bx, by in segs:
        ex, ey = bx - ax, by - ay
        t = np.clip(((x - ax) * ex + (y - ay) * ey) / (ex * ex + ey * ey), 0.0, 1.0)
        d = np.hypot(x - ax - t * ex, y - ay - t * ey)
        np.minimum(best, d, out=best)
    return best


def init_signed_distance(geometry: InterfaceGeometry, grid: Grid2) -> ScalarField:
    X, Y = grid.coords()
    d = distance_to_segments(X, Y, geometry.segments())
    sign = np.where(geometry.contains(X, Y), 1.0, -1.0)
    return ScalarField(grid, sign * d)


@numba.njit(cache=True)
def _godunov_update(u, i, j, nx, ny, h):
    a = 1e300
    if i > 0:
        a = u[i - 1, j]
    if i < nx - 1 and u[i + 1, j] < a:
        a = u[i + 1, j]
    b = 1e300
    if j > 0:
        b = u[i, j - 1]
    if j < ny - 1 and u[i, j + 1] < b:
        b = u[i, j + 1]
    if abs(a - b) >= h:
        return min(a, b) + h
    return 0.5 * (a + b + np.sqrt(2.0 * h * h - (a - b) * (a - b)))


@numba.njit(cache=True)
def _menger(px, py, ax, ay, bx, by):
    """Curvature of the circle through p, a, b, signed positive when p lies left of a->b."""
    cr = (ax - px) * (by - ay) - (ay - py) * (bx - ax)
    la = np.hypot(ax - px, ay - py)
    lb = np.hypot(bx - ax, by - ay)
    lc = np.hypot(bx - px, by - py)
    den = la * lb * lc
    if den <= 0.0:
        return 0.0
    k = 2.0 * abs(cr) / den
    # dot(p - a, left normal of a->b)
    side = (py - ay) * (bx - ax) - (px - ax) * (by - ay)
    return k if side > 0.0 else -k


@numba.njit(cache=True)
def _segment_curvature(seg, eid, kmax):
    """Signed curvature per segment from the circles through its neighbouring vertices.

    Positive means the curve bends toward the left normal of the segment.
    Segments share an endpoint when they carry the same grid-edge id.
    """
    n = seg.shape[0]
    ids = np.empty(2 * n, dtype=np.int64)
    for k in range(n):
        ids[2 * k] = eid[k, 0]
        ids[2 * k + 1] = eid[k, 1]
    order = np.argsort(ids)
    partner = np.full(2 * n, -1, dtype=np.int64)
    for m in range(2 * n - 1):
        p, q = order[m], order[m + 1]
        if ids[p] == ids[q]:
            partner[p] = q
            partner[q] = p
    kap = np.zeros(n)
    for k in range(n):
        ax, ay, bx, by = seg[k, 0], seg[k, 1], seg[k, 2], seg[k, 3]
        if np.hypot(bx - ax, by - ay) < 1e-6:
            continue
        tot = 0.0
        cnt = 0
        for end in range(2):
            sx = seg[k, 2 * end]
            sy = seg[k, 2 * end + 1]
            q = partner[2 * k + end]
            # step over near-zero-length segments (crossings at a node) to the next real vertex
            for _ in range(4):
                if q < 0:
                    break
                m = q // 2
                far = 1 - q % 2
                px, py = seg[m, 2 * far], seg[m, 2 * far + 1]
                if np.hypot(px - sx, py - sy) >= 1e-6:
                    break
                q = partner[2 * m + far]
            if q < 0 or np.hypot(px - sx, py - sy) < 1e-6:
                continue
            tot += _menger(px, py, ax, ay, bx, by)
            cnt += 1
        if cnt:
            c = tot / cnt
            kap[k] = min(max(c, -kmax), kmax)
    return kap


@numba.njit(cache=True)
def _redistance(v, h, band, near, passes):
    """Unsigned distance to the zero contour of ``v``, clamped at ``band``.

    The contour is the marching-squares polyline with each segment bowed into
    a circular arc whose curvature comes from the neighbouring vertices, so
    that a smooth interface is not flattened into chords on every call. Nodes
    within ``near`` cells of the contour get exact point-to-arc distances,
    fast sweeping (Godunov, 4 orderings, 2
    passes) fills the rest. When the exact zone already covers the band the
    sweeps are skipped; otherwise ``passes`` rounds of them run over the box
    the exact zone can reach.
    """
    nx, ny = v.shape
    seg, eid, cell = cell_segments(v, 0, nx - 1, 0, ny - 1, True)
    kap = _segment_curvature(seg, eid, 0.5)
    u = np.full((nx, ny), 1e300)
    for k in range(seg.shape[0]):
        ax = seg[k, 0]
        ay = seg[k, 1]
        bx = seg[k, 2]
        by = seg[k, 3]
        ex = bx - ax
        ey = by - ay
        ee = ex * ex + ey * ey
        L = np.sqrt(ee)
        nxv = 0.0
        nyv = 0.0
        if L > 0.0:
            nxv = -ey / L
            nyv = ex / L
        ck = kap[k]
        # exact arcs for real bends; nearly straight segments use the sag offset (no far-away centre)
        arc = abs(ck) > 1e-3 and L > 0.0 and 0.5 * L * abs(ck) < 1.0
        if arc:
            # circle through a and b; k > 0 puts the centre on the left normal side
            R = 1.0 / abs(ck)
            off = np.sqrt(R * R - 0.25 * ee)
            sg = 1.0 if ck > 0.0 else -1.0
            cx = 0.5 * (ax + bx) + sg * off * nxv
            cy = 0.5 * (ay + by) + sg * off * nyv
            rax = ax - cx
            ray = ay - cy
            rbx = bx - cx
            rby = by - cy
            span = rax * rby - ray * rbx
        ci = cell[k, 0]
        cj = cell[k, 1]
        for i in range(max(ci - near, 0), min(ci + near + 2, nx)):
            for j in range(max(cj - near, 0), min(cj + near + 2, ny)):
                if arc:
                    qx = i - cx
                    qy = j - cy
                    # inside the cone from the centre spanned by the arc: radial distance
                    if (rax * qy - ray * qx) * span >= 0.0 and (qx * rby - qy * rbx) * span >= 0.0:
                        d = abs(np.sqrt(qx * qx + qy * qy) - R) * h
                    else:
                        da = (i - ax) ** 2 + (j - ay) ** 2
                        db = (i - bx) ** 2 + (j - by) ** 2
                        d = np.sqrt(min(da, db)) * h
                else:
                    if ee > 0.0:
                        t = ((i - ax) * ex + (j - ay) * ey) / ee
                        if t < 0.0:
                            t = 0.0
                        elif t > 1.0:
                            t = 1.0
                    else:
                        t = 0.0
                    dx = i - ax - t * ex
                    dy = j - ay - t * ey
                    if ck != 0.0 and 0.0 < t < 1.0:
                        # the bow sits at -sag along the left normal
                        d = abs(dx * nxv + dy * nyv + 0.5 * ck * t * (1.0 - t) * ee) * h
                    else:
                        d = np.sqrt(dx * dx + dy * dy) * h
                if d < u[i, j]:
                    u[i, j] = d
    lim = near * h
    if lim >= band:
        for i in range(nx):
            for j in range(ny):
                if u[i, j] > band:
                    u[i, j] = band
        return u
    fixed = np.zeros((nx, ny), dtype=np.bool_)
    i0, i1, j0, j1 = nx, -1, ny, -1
    for i in range(nx):
        for j in range(ny):
            if u[i, j] <= lim:
                fixed[i, j] = True
                i0 = min(i0, i)
                i1 = max(i1, i)
                j0 = min(j0, j)
                j1 = max(j1, j)
            else:
                u[i, j] = 1e300
    # nodes farther than band from the exact zone end up clamped anyway
    pad = int(np.ceil(band / h - near)) + 1
    i0 = max(i0 - pad, 0)
    i1 = min(i1 + pad, nx - 1)
    j0 = max(j0 - pad, 0)
    j1 = min(j1 + pad, ny - 1)
    mi = i1 - i0 + 1
    mj = j1 - j0 + 1
    for _ in range(passes):
        for sweep in range(4):
            for ii in range(mi):
                i = i0 + ii if (sweep == 0 or sweep == 2) else i1 - ii
                for jj in range(mj):
                    j = j0 + jj if (sweep == 0 or sweep == 1) else j1 - jj
                    if fixed[i, j]:
                        continue
                    d = _godunov_update(u, i, j, nx, ny, h)
                    if d < u[i, j]:
                        u[i, j] = d
    for i in range(nx):
        for j in range(ny):
            if u[i, j] > band:
                u[i, j] = band
    return u


def reinitialize_array(v: np.ndarray, grid: Grid2, band_width: float, near: int | None = None,
                       reach: float | None = None) -> np.ndarray:
    """Signed distance to the zero contour of ``v``, clamped at ``band_width``.

    ``near`` is the width (cells) of the zone computed by exact point-segment
    distances; by default it covers the whole band, otherwise fast sweeping
    fills the rest. With ``reach > band_width`` the exact band is continued by
    fast sweeping and the clamp moves out to ``reach``.
    """
    if near is None:
        near = int(np.ceil(band_width / grid.dx)) + 1
    clamp = band_width if reach is None else max(reach, band_width)
    if not (np.any(v > 0) and np.any(v <= 0)):
        raise NoInterfaceError("cannot redistance a field of uniform sign")
    # a single round of sweeps suffices when they only continue an exact band
    passes = 2 if near * grid.dx < band_width else 1
    u = _redistance(np.ascontiguousarray(v, dtype=float), grid.dx, clamp, near, passes)
    return np.where(v > 0, u, -u)


def reinitialize(psi: ScalarField, band_width: float | None = None) -> ScalarField:
    """Restore the distance property while keeping the zero contour in place.

    ``band_width`` defaults to 20 cells; values beyond it are clamped.
    """
    if band_width is None:
        band_width = 20.0 * psi.grid.dx
    return psi.with_values(reinitialize_array(psi.values, psi.grid, band_width))


def curvature(psi: ScalarField, smooth: int = 2) -> ScalarField:
    """Mean curvature of the level sets of a distance function, ``-laplacian(psi)``.

    With psi > 0 inside, a circle of radius r has curvature +1/r on its contour.
    A redistanced field is the distance to a polyline, whose Laplacian carries
    cell-scale noise of the order of the curvature itself; ``smooth`` passes of
    a separable [1, 2, 1]/4 filter remove it before differencing.
    """
    v = psi.values
    for _ in range(smooth):
        for axis in (0, 1):
            v = convolve1d(v, _BINOMIAL, axis=axis, mode="nearest")
    return psi.with_values(-laplacian_array(v, psi.grid))


def heaviside_array(v: np.ndarray, eps: float) -> np.ndarray:
    s = np.clip(v / eps, -1.0, 1.0)
    # exact 0 and 1 outside the transition zone (sin(pi) is not exactly zero)
    return np.where(np.abs(s) < 1.0, 0.5 * (1.0 + s + np.sin(np.pi * s) / np.pi), 0.5 * (1.0 + s))


def heaviside_derivative_array(v: np.ndarray, eps: float) -> np.ndarray:
    s = v / eps
    return np.where(np.abs(s) < 1.0, 0.5 / eps * (1.0 + np.cos(np.pi * s)), 0.0)


def heaviside_smoothed(psi: ScalarField, eps: float) -> ScalarField:
    if eps <= 0:
        raise ValueError("eps must be positive")
    return psi.with_values(heaviside_array(psi.values, eps))


@dataclass
class Phase:
    """A grain: level-set field, normalized source amplitude and Dirichlet mask."""

    id: int
    psi: ScalarField
    lam: float = 1.0
    frozen: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (0.0 < self.lam <= 1.0):
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam}")
        if self.frozen is None:
            self.frozen = np.zeros(self.psi.grid.shape, dtype=bool)

    @property
    def grid(self) -> Grid2:
        return self.psi.grid
