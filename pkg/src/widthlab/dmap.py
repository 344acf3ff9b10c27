"""Discrete maps from sphere/disk/cylinder domains into an embedded manifold,
with the energy, area and conformality functionals, smoothing, collar
interpolation between nearby boundary traces, and conformal dilations.

Sphere-domain functionals exploit that in two dimensions energy, area and
the conformality defect are conformally covariant: in stereographic chart
coordinates they are plain flat integrals, weighted only by the partition
of unity that splits the sphere between the two charts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import domains
from .domains import CylinderDomain, SphereDomain, d_axis, d_axis_periodic
from .errors import (DomainMismatch, NoCommonPoint, OutsideTube, OverlapViolation,
                     TraceTooFar, TubeEscape)
from .manifold import EmbeddedManifold

OVERLAP_TOL = 1e-6


# ---------------------------------------------------------------------------
# maps

@dataclass
class DiscreteMap:
    """Node samples of a map into `target`; one value block per chart."""

    domain: object
    target: EmbeddedManifold
    values: list  # [(n,n,N)] per chart for spheres, single-block otherwise

    def copy(self):
        return DiscreteMap(self.domain, self.target, [v.copy() for v in self.values])

    @property
    def n_charts(self):
        return len(self.values)

    def validate(self, on_tol=None, overlap_tol=OVERLAP_TOL):
        for v in self.values:
            d = self.target.distance(v)
            if np.max(d) > (on_tol or self.target.on_tol) * 10 + 1e-12:
                raise ValueError(f"node values off the target by {np.max(d):.3e}")
        if isinstance(self.domain, SphereDomain):
            err = overlap_disagreement(self)
            if err > overlap_tol:
                raise ValueError(f"chart overlap disagreement {err:.3e}")
        return self


def sphere_map(dom: SphereDomain, target: EmbeddedManifold, fn,
               sync: bool = True) -> DiscreteMap:
    """Build a sphere-domain map from an ambient-valued function of sphere points."""
    vals = [np.asarray(fn(dom.points[c]), float) for c in (0, 1)]
    vals = [target.project(v) for v in vals]
    u = DiscreteMap(dom, target, vals)
    if sync:
        sync_owner(u)
    return u


def sync_owner(u: DiscreteMap):
    """Make owner charts authoritative: refresh every node from the chart
    that owns its sphere point."""
    dom = u.domain
    for c in (0, 1):
        sync_overlap(u, chart=c, mask=dom.owner_chart(dom.points[1 - c]) == c)
    return u


def identity_sphere_map(dom: SphereDomain, target=None) -> DiscreteMap:
    from .manifold import round_sphere
    target = target or round_sphere(2, 1.0)
    scale = getattr(target, "radius", 1.0)
    u = DiscreteMap(dom, target, [scale * dom.points[c].copy() for c in (0, 1)])
    return sync_owner(u)


def constant_sphere_map(dom: SphereDomain, target, point) -> DiscreteMap:
    p = np.asarray(point, float)
    vals = [np.broadcast_to(p, dom.points[c].shape[:2] + p.shape).copy() for c in (0, 1)]
    return DiscreteMap(dom, target, vals)


def overlap_disagreement(u: DiscreteMap) -> float:
    """Max distance between non-owner node values and the owner-chart samples."""
    dom = u.domain
    worst = 0.0
    safe = dom.interp_safe_radius()
    for c in (0, 1):
        pts = dom.points[c]
        own = dom.owner_chart(pts)
        other = 1 - c
        Xo, Yo = dom.sphere_to_chart(other, pts)
        m = (own == other) & (np.hypot(Xo, Yo) <= safe)
        if not np.any(m):
            continue
        ref = u.target.project(
            domains.catmullrom(u.values[other], dom.axis[0], dom.h, Xo[m], Yo[m]))
        worst = max(worst, float(np.max(np.linalg.norm(u.values[c][m] - ref, axis=-1))))
    return worst


def sync_overlap(u: DiscreteMap, chart: int, mask=None):
    """Re-interpolate the other chart's nodes from `chart` after its nodes changed.

    mask: boolean (n,n) over the *other* chart selecting nodes to refresh;
    default: all nodes the source chart can interpolate safely.
    """
    dom = u.domain
    other = 1 - chart
    pts = dom.points[other]
    Xs, Ys = dom.sphere_to_chart(chart, pts)
    m = np.hypot(Xs, Ys) <= dom.interp_safe_radius()
    if mask is not None:
        m &= mask
    if not np.any(m):
        return
    vals = domains.catmullrom(u.values[chart], dom.axis[0], dom.h, Xs[m], Ys[m])
    u.values[other][m] = u.target.project(vals)


# ---------------------------------------------------------------------------
# differentials and integral functionals

def chart_differential(u: DiscreteMap, c: int):
    """(du/dX, du/dY) of chart block c in flat chart coordinates."""
    dom, v = u.domain, u.values[c]
    if isinstance(dom, CylinderDomain):
        return d_axis(v, dom.h_t, 0), d_axis_periodic(v, dom.h_theta, 1)
    return d_axis(v, dom.h, 0), d_axis(v, dom.h, 1)


def _weights(dom):
    if isinstance(dom, SphereDomain):
        return dom.flat_weights
    return [dom.flat_weights]


def energy_density(u: DiscreteMap, c: int):
    ux, uy = chart_differential(u, c)
    return 0.5 * (np.sum(ux * ux, -1) + np.sum(uy * uy, -1))


def energy(u: DiscreteMap, region=None) -> float:
    """Dirichlet energy; restricted to a BallFamily region when given."""
    if region is not None:
        return _region_energy(u, region)
    return float(sum(np.sum(w * energy_density(u, c))
                     for c, w in enumerate(_weights(u.domain))))


def _region_energy(u: DiscreteMap, fam) -> float:
    dom = u.domain
    total = 0.0
    for b in fam:
        ux, uy = chart_differential(u, b.chart)
        dens = 0.5 * (np.sum(ux * ux, -1) + np.sum(uy * uy, -1))
        total += float(np.sum(dens[ball_mask(dom, b)])) * dom.h**2
    return total


def jacobian_density(u: DiscreteMap, c: int):
    ux, uy = chart_differential(u, c)
    a = np.sum(ux * ux, -1)
    b = np.sum(uy * uy, -1)
    cc = np.sum(ux * uy, -1)
    return np.sqrt(np.maximum(a * b - cc * cc, 0.0))


def area(u: DiscreteMap) -> float:
    return float(sum(np.sum(w * jacobian_density(u, c))
                     for c, w in enumerate(_weights(u.domain))))


def conformality_defect(u: DiscreteMap) -> float:
    """L1 size of the off-conformal part of the differential; 0 iff energy = area."""
    total = 0.0
    for c, w in enumerate(_weights(u.domain)):
        ux, uy = chart_differential(u, c)
        cross = np.sum(ux * uy, -1)
        aniso = 0.5 * (np.sum(ux * ux, -1) - np.sum(uy * uy, -1))
        total += float(np.sum(w * np.sqrt(cross**2 + aniso**2)))
    return total


def jacobian_l1_distance(u: DiscreteMap, v: DiscreteMap) -> float:
    if u.domain is not v.domain and u.domain.descriptor() != v.domain.descriptor():
        raise DomainMismatch("maps live on different domains")
    return float(sum(np.sum(w * np.abs(jacobian_density(u, c) - jacobian_density(v, c)))
                     for c, w in enumerate(_weights(u.domain))))


def c0_w12_distance(u: DiscreteMap, v: DiscreteMap) -> float:
    """Sup-norm plus W^{1,2}-norm distance (the continuity norm for sweepouts)."""
    if u.domain is not v.domain and u.domain.descriptor() != v.domain.descriptor():
        raise DomainMismatch("maps live on different domains")
    dom = u.domain
    sup = 0.0
    l2 = 0.0
    grad = 0.0
    aw = dom.area_weights if isinstance(dom, SphereDomain) else [dom.flat_weights]
    for c, w in enumerate(_weights(dom)):
        d = u.values[c] - v.values[c]
        sup = max(sup, float(np.max(np.linalg.norm(d, axis=-1))))
        l2 += float(np.sum(aw[c] * np.sum(d * d, -1)))
        dv = DiscreteMap(dom, u.target, [d if k == c else np.zeros_like(d)
                                         for k in range(u.n_charts)])
        ux, uy = chart_differential(dv, c)
        grad += float(np.sum(w * (np.sum(ux * ux, -1) + np.sum(uy * uy, -1))))
    return sup + np.sqrt(l2 + grad)


# ---------------------------------------------------------------------------
# balls and families

@dataclass(frozen=True)
class Ball:
    """Disk in one stereographic chart; rho*B shares the center, scales radius."""

    chart: int
    center: tuple
    radius: float

    def scaled(self, rho: float) -> "Ball":
        return Ball(self.chart, self.center, self.radius * rho)

    def cap(self, dom: SphereDomain):
        """Spherical cap (axis, angular radius) the chart disk bounds."""
        cx, cy = self.center
        ang = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
        ring = dom.chart_to_sphere(self.chart,
                                   cx + self.radius * np.cos(ang),
                                   cy + self.radius * np.sin(ang))
        nrm = np.cross(ring[1] - ring[0], ring[2] - ring[0])
        nrm /= np.linalg.norm(nrm)
        d = float(nrm @ ring[0])
        inside = dom.chart_to_sphere(self.chart, np.array(cx), np.array(cy))
        if float(nrm @ inside) < d:
            nrm, d = -nrm, -d
        return nrm, float(np.arccos(np.clip(d, -1.0, 1.0)))


class BallFamily(list):
    """Finitely many balls with pairwise disjoint closures."""

    def validate(self, dom: SphereDomain):
        caps = [b.cap(dom) for b in self]
        for i in range(len(caps)):
            for j in range(i + 1, len(caps)):
                ni, ti = caps[i]
                nj, tj = caps[j]
                sep = np.arccos(np.clip(ni @ nj, -1.0, 1.0))
                if sep <= ti + tj:
                    raise OverlapViolation(f"balls {i} and {j} are not disjoint")
        return self

    def scaled(self, rho: float) -> "BallFamily":
        return BallFamily(b.scaled(rho) for b in self)


def ball_mask(dom, b: Ball, rho: float = 1.0):
    cx, cy = b.center
    r = b.radius * rho
    return (dom.X - cx) ** 2 + (dom.Y - cy) ** 2 <= r * r


def ball_fits_chart(dom: SphereDomain, b: Ball, margin_cells: int = 3) -> bool:
    cx, cy = b.center
    lim = dom.half_width - margin_cells * dom.h
    return max(abs(cx), abs(cy)) + b.radius <= lim


def ball_in_pure_region(dom: SphereDomain, b: Ball) -> bool:
    """Cap avoids the partition blending band, so its quadrature is single-chart."""
    n, theta = b.cap(dom)
    alpha = np.arccos(np.clip(n[2], -1.0, 1.0))  # axis angle from north pole
    zmax = np.cos(max(0.0, alpha - theta))
    zmin = np.cos(min(np.pi, alpha + theta))
    if b.chart == 0:
        return zmax <= -dom.band
    return zmin >= dom.band


# ---------------------------------------------------------------------------
# Moebius transformations / conformal dilations

def _homog(pts):
    """Chart-0 homogeneous coordinates (a : b), w = a/b, robust at both poles."""
    pts = np.asarray(pts, float)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    use0 = (1.0 - z) >= np.abs(1.0 + z) * 0  # prefer (x+iy, 1-z) unless near north
    near_north = z > 0.5
    a = np.where(near_north, 1.0 + z, x + 1j * y)
    b = np.where(near_north, x - 1j * y, 1.0 - z)
    del use0
    return a, b


def _from_homog(a, b):
    den = np.abs(a) ** 2 + np.abs(b) ** 2
    w = 2.0 * a * np.conj(b) / den
    z = (np.abs(a) ** 2 - np.abs(b) ** 2) / den
    return np.stack([w.real, w.imag, z], axis=-1)


@dataclass(frozen=True)
class Mobius:
    """Conformal self-map of the sphere as a 2x2 complex matrix acting on
    chart-0 homogeneous coordinates."""

    m: np.ndarray

    def apply(self, pts):
        a, b = _homog(pts)
        return _from_homog(self.m[0, 0] * a + self.m[0, 1] * b,
                           self.m[1, 0] * a + self.m[1, 1] * b)

    def inverse(self) -> "Mobius":
        (A, B), (C, D) = self.m
        return Mobius(np.array([[D, -B], [-C, A]]) / (A * D - B * C))

    def __matmul__(self, other: "Mobius") -> "Mobius":
        return Mobius(self.m @ other.m)

    @staticmethod
    def identity() -> "Mobius":
        return Mobius(np.eye(2, dtype=complex))

    @staticmethod
    def rotation_to_south(p) -> "Mobius":
        a, b = _homog(np.asarray(p, float))
        return Mobius(np.array([[b, -a], [np.conj(a), np.conj(b)]], dtype=complex))

    @staticmethod
    def chart0_dilation(lam: float) -> "Mobius":
        return Mobius(np.array([[lam, 0.0], [0.0, 1.0]], dtype=complex))


@dataclass(frozen=True)
class ConformalDilation:
    """Self-map of the sphere taking a given ball to the southern hemisphere."""

    mob: Mobius
    factor: float  # dilation factor in the rotated chart

    def apply(self, pts):
        return self.mob.apply(pts)

    def inverse_apply(self, pts):
        return self.mob.inverse().apply(pts)


def conformal_dilation(dom: SphereDomain, b: Ball) -> ConformalDilation:
    axis, theta = b.cap(dom)
    rot = Mobius.rotation_to_south(axis)
    lam = 1.0 / np.tan(0.5 * theta)
    return ConformalDilation(Mobius.chart0_dilation(lam) @ rot, float(lam))


def compose_mobius(u: DiscreteMap, mob: Mobius) -> DiscreteMap:
    """The map x -> u(mob(x)), resampling u's charts at the moved points."""
    dom = u.domain
    vals = []
    for c in (0, 1):
        moved = mob.apply(dom.points[c])
        vals.append(u.target.project(dom.evaluate(u.values, moved)))
    return DiscreteMap(dom, u.target, vals)


def mobius_as_map(dom: SphereDomain, mob: Mobius, target) -> DiscreteMap:
    """Exact node evaluation of a Moebius self-map, as a map into a 2-sphere target."""
    scale = getattr(target, "radius", 1.0)
    vals = [scale * mob.apply(dom.points[c]) for c in (0, 1)]
    return DiscreteMap(dom, target, vals)


# ---------------------------------------------------------------------------
# mollification

def _mollifier_lattice(m: int = 5):
    """Fixed lattice quadrature of the bump (1-|y|^2)^3 on the unit ball."""
    ax = np.linspace(-1.0, 1.0, m)
    Yx, Yy, Yz = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.stack([Yx, Yy, Yz], -1).reshape(-1, 3)
    s2 = np.sum(pts * pts, -1)
    keep = s2 < 1.0
    pts = pts[keep]
    w = (1.0 - s2[keep]) ** 3
    return pts, w / w.sum()


_MOLL_PTS, _MOLL_W = _mollifier_lattice()


def mollify(u: DiscreteMap, r: float) -> DiscreteMap:
    """Average u over the sphere moves x -> (x - y)/|x - y|, |y| < r, with a
    fixed radial bump weight, then project back to the target."""
    dom = u.domain
    if not isinstance(dom, SphereDomain):
        raise DomainMismatch("mollify is defined for sphere-domain maps")
    if not (0.0 < r < 1.0):
        raise ValueError("mollification radius must lie in (0, 1)")
    target = u.target
    out = []
    for c in (0, 1):
        pts = dom.points[c]
        acc = np.zeros_like(u.values[c])
        for y, w in zip(_MOLL_PTS * r, _MOLL_W):
            q = pts - y
            q /= np.linalg.norm(q, axis=-1, keepdims=True)
            acc += w * dom.evaluate(u.values, q)
        dist = target.distance(acc)
        if np.max(dist) >= target.tubular_radius:
            raise TubeEscape(f"averaged values {np.max(dist):.3g} from the target")
        try:
            out.append(target.project(acc))
        except OutsideTube as e:
            raise TubeEscape(str(e)) from e
    return sync_owner(DiscreteMap(dom, target, out))


# ---------------------------------------------------------------------------
# collar interpolation between boundary traces

@dataclass
class CollarResult:
    rho: float
    radii: np.ndarray      # (n_r,)
    values: np.ndarray     # (n_r, m, N) on the annulus, row 0 at R - rho
    gradient_integral: float   # ∫ |∇w|²
    bound: float               # 17√2 (∫(|f'|²+|g'|²))^½ (∫|f'-g'|²)^½
    ratio: float


def _fft_theta_derivative(f):
    m = f.shape[0]
    k = np.fft.rfftfreq(m, d=1.0 / m)
    F = np.fft.rfft(f, axis=0)
    return np.fft.irfft(1j * k[:, None] * F, n=m, axis=0)


def collar_interpolate(f, g, R: float, target: EmbeddedManifold,
                       n_r: int = 17, tau: float = None) -> CollarResult:
    """Annulus map w on B_R \\ B_{R-rho} with w(R-rho,.) = f and w(R,.) = g.

    f, g: (m, N) arrays sampled at theta_k = 2 pi k / m, mapping to the target
    and agreeing at at least one sample.  All trace integrals are the
    scale-invariant d/dtheta forms.
    """
    f = np.asarray(f, float)
    g = np.asarray(g, float)
    m = f.shape[0]
    dtheta = 2 * np.pi / m
    if float(np.min(np.linalg.norm(f - g, axis=-1))) > 1e-9 * (1 + np.abs(f).max()):
        raise NoCommonPoint("traces nowhere agree")
    fp = _fft_theta_derivative(f)
    gp = _fft_theta_derivative(g)
    i_diff = float(np.sum((fp - gp) ** 2)) * dtheta
    i_sum = float(np.sum(fp**2) + np.sum(gp**2)) * dtheta
    if tau is None:
        tau = target.safe_tubular_radius / np.sqrt(2 * np.pi)
    if i_diff > tau * tau:
        raise TraceTooFar(f"trace derivative gap {i_diff:.3e} exceeds {tau*tau:.3e}")
    rho = R * np.sqrt(i_diff / (8.0 * i_sum)) if i_sum > 0 else 0.0
    rho = min(rho, R / 2.0)
    radii = np.linspace(R - rho, R, n_r)
    s = np.linspace(0.0, 1.0, n_r)[:, None, None]
    w = f[None] + s * (g - f)[None]
    if n_r > 2 and rho > 0:
        w[1:-1] = target.project(w[1:-1])
    w[0], w[-1] = f.copy(), g.copy()
    if rho <= 1e-300:
        grad = 0.0
    else:
        dr = radii[1] - radii[0]
        wr = d_axis(w, dr, 0)
        wt = d_axis_periodic(w, dtheta, 1)
        dens = np.sum(wr * wr, -1) + np.sum(wt * wt, -1) / radii[:, None] ** 2
        rw = radii[:, None] * np.ones((1, m)) * dr * dtheta
        rw[0] *= 0.5
        rw[-1] *= 0.5
        grad = float(np.sum(dens * rw))
    bound = 17.0 * np.sqrt(2.0) * np.sqrt(i_sum * i_diff)
    ratio = grad / bound if bound > 0 else 0.0
    return CollarResult(float(rho), radii, w, grad, float(bound), float(ratio))
