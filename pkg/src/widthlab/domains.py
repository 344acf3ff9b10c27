"""Discretized map domains: the two-chart sphere, flat disks, flat cylinders.

The 2-sphere is covered by two stereographic charts (projection from the
north pole and from the south pole, the latter orientation-flipped so the
transition is w -> 1/w).  Each chart is a uniform n x n grid on the square
[-L, L]^2 with L > 1, so the charts overlap in an equatorial band.  A
smooth partition of unity in the height z blends the two quadratures;
because energy, area and the conformality defect are conformally covariant
in two dimensions, all of them reduce to flat integrals in chart
coordinates weighted by the partition alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def smoothstep(t):
    """Quintic smoothstep, C^2 at the junctions."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def d_axis(values, h, axis):
    """4th-order centered derivative, degrading to 2nd order near edges."""
    v = np.moveaxis(np.asarray(values, float), axis, 0)
    n = v.shape[0]
    out = np.empty_like(v)
    if n >= 5:
        out[2:-2] = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * h)
        out[1] = (v[2] - v[0]) / (2.0 * h)
        out[-2] = (v[-1] - v[-3]) / (2.0 * h)
    elif n >= 3:
        out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def d_axis_periodic(values, h, axis):
    """4th-order centered derivative on a periodic axis."""
    v = np.moveaxis(np.asarray(values, float), axis, 0)
    m2, m1 = np.roll(v, 2, 0), np.roll(v, 1, 0)
    p1, p2 = np.roll(v, -1, 0), np.roll(v, -2, 0)
    out = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h)
    return np.moveaxis(out, 0, axis)


def _cr_weights(t):
    """Catmull-Rom cubic kernel weights for offsets -1, 0, 1, 2."""
    t2 = t * t
    t3 = t2 * t
    return (-0.5 * t3 + t2 - 0.5 * t,
            1.5 * t3 - 2.5 * t2 + 1.0,
            -1.5 * t3 + 2.0 * t2 + 0.5 * t,
            0.5 * t3 - 0.5 * t2)


def catmullrom(grid, xs0, h, px, py):
    """Bicubic (Catmull-Rom) sampling of grid (n, n, ...) at points (px, py)."""
    g = np.asarray(grid)
    n = g.shape[0]
    fx = np.clip((np.asarray(px) - xs0) / h, 1.0, n - 2.000001)
    fy = np.clip((np.asarray(py) - xs0) / h, 1.0, n - 2.000001)
    i = fx.astype(int)
    j = fy.astype(int)
    wx = _cr_weights((fx - i)[..., None])
    wy = _cr_weights((fy - j)[..., None])
    flat = g.reshape(n, n, -1)
    acc = 0.0
    for a in range(4):
        row = 0.0
        for b in range(4):
            row = row + flat[i + a - 1, j + b - 1] * wy[b]
        acc = acc + row * wx[a]
    return acc.reshape(np.shape(px) + g.shape[2:])


def bilinear(grid, xs0, h, px, py):
    """Sample grid (n, n, ...) at points (px, py); grid[i, j] sits at
    (xs0 + i*h, xs0 + j*h).  Points must be inside the grid rectangle."""
    g = np.asarray(grid)
    n = g.shape[0]
    fx = np.clip((np.asarray(px) - xs0) / h, 0.0, n - 1.000001)
    fy = np.clip((np.asarray(py) - xs0) / h, 0.0, n - 1.000001)
    i = fx.astype(int)
    j = fy.astype(int)
    tx = (fx - i)[..., None]
    ty = (fy - j)[..., None]
    flat = g.reshape(n, n, -1)
    v = (flat[i, j] * (1 - tx) * (1 - ty) + flat[i + 1, j] * tx * (1 - ty)
         + flat[i, j + 1] * (1 - tx) * ty + flat[i + 1, j + 1] * tx * ty)
    return v.reshape(np.shape(px) + g.shape[2:])


# ---------------------------------------------------------------------------


@dataclass
class SphereDomain:
    """Two-chart stereographic discretization of the round unit 2-sphere."""

    n: int = 129
    half_width: float = 1.25
    band: float = 0.12  # partition-of-unity half-height in z

    axis: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False)
    X: np.ndarray = field(init=False, repr=False)
    Y: np.ndarray = field(init=False, repr=False)
    points: list = field(init=False, repr=False)        # per chart (n,n,3)
    flat_weights: list = field(init=False, repr=False)  # pu * h^2
    area_weights: list = field(init=False, repr=False)  # pu * lam^2 * h^2
    z: list = field(init=False, repr=False)

    def __post_init__(self):
        L, n = self.half_width, self.n
        self.axis = np.linspace(-L, L, n)
        self.h = self.axis[1] - self.axis[0]
        self.X, self.Y = np.meshgrid(self.axis, self.axis, indexing="ij")
        r2 = self.X**2 + self.Y**2
        lam2 = (2.0 / (1.0 + r2)) ** 2
        self.points, self.flat_weights, self.area_weights, self.z = [], [], [], []
        for c in (0, 1):
            p = self.chart_to_sphere(c, self.X, self.Y)
            zc = p[..., 2]
            pu = self.partition(c, zc)
            self.points.append(p)
            self.z.append(zc)
            self.flat_weights.append(pu * self.h**2)
            self.area_weights.append(pu * lam2 * self.h**2)

    # -- charts ---------------------------------------------------------
    @staticmethod
    def chart_to_sphere(c, X, Y):
        r2 = X**2 + Y**2
        d = 1.0 + r2
        if c == 0:
            return np.stack([2 * X / d, 2 * Y / d, (r2 - 1.0) / d], axis=-1)
        return np.stack([2 * X / d, -2 * Y / d, (1.0 - r2) / d], axis=-1)

    @staticmethod
    def sphere_to_chart(c, p):
        p = np.asarray(p, float)
        x, y, zz = p[..., 0], p[..., 1], p[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            if c == 0:
                d = 1.0 - zz
                return x / d, y / d
            d = 1.0 + zz
            return x / d, -y / d

    def partition(self, c, zvals):
        s = smoothstep((np.asarray(zvals) + self.band) / (2.0 * self.band))
        return s if c == 1 else 1.0 - s

    @staticmethod
    def owner_chart(p):
        """Chart whose projection pole is farther from p (0 south, 1 north)."""
        return (np.asarray(p)[..., 2] > 0.0).astype(int)

    def sample_chart(self, values_c, px, py):
        return catmullrom(values_c, self.axis[0], self.h, px, py)

    def evaluate(self, values, pts):
        """Evaluate per-chart node `values` at arbitrary sphere points."""
        pts = np.asarray(pts, float)
        own = self.owner_chart(pts)
        out = None
        for c in (0, 1):
            m = own == c
            if not np.any(m):
                continue
            X, Y = self.sphere_to_chart(c, pts[m])
            v = self.sample_chart(values[c], X, Y)
            if out is None:
                out = np.empty(pts.shape[:-1] + v.shape[len(X.shape):], v.dtype)
            out[m] = v
        return out

    def interp_safe_radius(self):
        return self.half_width - 2 * self.h

    def total_weight(self):
        return sum(w.sum() for w in self.area_weights)

    def overlap_band_width_deg(self):
        """Angular width of the band where both charts have valid samples."""
        L = self.interp_safe_radius()
        zmax = (L**2 - 1.0) / (L**2 + 1.0)
        return float(np.degrees(2 * np.arcsin(zmax)))

    def descriptor(self):
        return {"kind": "sphere2", "n": self.n, "half_width": self.half_width,
                "band": self.band}


@dataclass
class DiskDomain:
    """Uniform grid on [-R, R]^2; quadrature over nodes inside the disk."""

    radius: float = 1.0
    n: int = 129

    axis: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False)
    X: np.ndarray = field(init=False, repr=False)
    Y: np.ndarray = field(init=False, repr=False)
    inside: np.ndarray = field(init=False, repr=False)
    flat_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.axis = np.linspace(-self.radius, self.radius, self.n)
        self.h = self.axis[1] - self.axis[0]
        self.X, self.Y = np.meshgrid(self.axis, self.axis, indexing="ij")
        rr = np.hypot(self.X, self.Y)
        self.inside = rr <= self.radius + 1e-12
        self.flat_weights = np.where(self.inside, self.h**2, 0.0)

    def descriptor(self):
        return {"kind": "disk", "radius": self.radius, "n": self.n}


@dataclass
class CylinderDomain:
    """Flat product [t0, t1] x S^1, n_t x n_theta grid, periodic in theta."""

    t0: float
    t1: float
    n_t: int = 129
    n_theta: int = 96

    t: np.ndarray = field(init=False, repr=False)
    theta: np.ndarray = field(init=False, repr=False)
    h_t: float = field(init=False)
    h_theta: float = field(init=False)
    flat_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.t = np.linspace(self.t0, self.t1, self.n_t)
        self.theta = np.arange(self.n_theta) * (2 * np.pi / self.n_theta)
        self.h_t = self.t[1] - self.t[0]
        self.h_theta = 2 * np.pi / self.n_theta
        w = np.full((self.n_t, self.n_theta), self.h_t * self.h_theta)
        w[0] *= 0.5
        w[-1] *= 0.5
        self.flat_weights = w

    def descriptor(self):
        return {"kind": "cylinder", "t0": self.t0, "t1": self.t1,
                "n_t": self.n_t, "n_theta": self.n_theta}
