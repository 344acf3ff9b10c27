"""Compact target manifolds embedded in Euclidean space.

Each kind carries a nearest-point projection, tubular-neighborhood radii,
a second-fundamental-form bound, and tangent frames.  All kinds are
analytic (round sphere, ellipsoid, affine subspace); projections are
closed form up to a scalar root solve for the ellipsoid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutsideTube

DEFAULT_ON_TOL = 1e-10


@dataclass(frozen=True)
class EmbeddedManifold:
    """Base class; use the round_sphere / ellipsoid / affine_subspace constructors."""

    kind: str
    dim: int
    ambient_dim: int
    tubular_radius: float        # inward well-posedness margin for projection
    safe_tubular_radius: float   # half of the above; |dΠ|² ≤ 2 holds inside
    sff_bound: float             # sup |A| over the manifold
    projection_lipschitz: float  # C with |dΠ_x| ≤ 1 + C·dist(x, M) in the tube
    on_tol: float = DEFAULT_ON_TOL

    # -- interface -----------------------------------------------------
    def project(self, x):
        raise NotImplementedError

    def distance(self, x):
        raise NotImplementedError

    def normal_space_projector(self, x):
        """(..., N, N) orthogonal projector onto the normal space at x ∈ M."""
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError

    # -- shared helpers ------------------------------------------------
    def contains(self, x, tol=None):
        tol = self.on_tol if tol is None else tol
        return np.asarray(self.distance(x)) <= tol

    def normal_part(self, x, y):
        """Component of (x - y) normal to the tangent space at x; x, y on M."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        d = x - y
        pn = self.normal_space_projector(x)
        return np.einsum("...ij,...j->...i", pn, d)

    def tangent_basis(self, x):
        """Orthonormal frame of the tangent space at x ∈ M, shape (..., dim, N)."""
        x = np.asarray(x, float)
        pn = self.normal_space_projector(x)
        pt = np.eye(self.ambient_dim) - pn
        # orthonormalize the dominant columns of the tangent projector
        q = _projector_basis(pt, self.dim)
        return q

    def normal_part_constant(self) -> float:
        """C with |normal_part(x, y)| ≤ C·|x - y|² for x, y on M."""
        raise NotImplementedError


def _projector_basis(p, rank):
    """Deterministic orthonormal basis of the range of symmetric projector(s) p."""
    p = np.asarray(p, float)
    n = p.shape[-1]
    cols = p.reshape(-1, n, n)
    out = np.empty((cols.shape[0], rank, n))
    for k, m in enumerate(cols):
        # Gram-Schmidt over columns picked by decreasing norm; deterministic
        order = np.argsort(-np.einsum("ij,ij->j", m, m), kind="stable")
        basis = []
        for j in order:
            v = m[:, j].copy()
            for b in basis:
                v -= (v @ b) * b
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                basis.append(v / nv)
            if len(basis) == rank:
                break
        out[k] = np.stack(basis)
    return out.reshape(p.shape[:-2] + (rank, n))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundSphere(EmbeddedManifold):
    radius: float = 1.0

    def project(self, x):
        x = np.asarray(x, float)
        r = np.linalg.norm(x, axis=-1)
        inner = self.radius - self.tubular_radius
        if np.any(r <= inner):
            raise OutsideTube(f"point(s) within {inner:.3g} of the center")
        return x * (self.radius / r)[..., None]

    def distance(self, x):
        x = np.asarray(x, float)
        return np.abs(np.linalg.norm(x, axis=-1) - self.radius)

    def normal_space_projector(self, x):
        x = np.asarray(x, float)
        n = x / np.linalg.norm(x, axis=-1, keepdims=True)
        return n[..., :, None] * n[..., None, :]

    def normal_part_constant(self):
        return 0.5 / self.radius

    def descriptor(self):
        return {"kind": "sphere", "dim": self.dim, "radius": self.radius}


def round_sphere(dim: int, radius: float = 1.0, on_tol=DEFAULT_ON_TOL) -> RoundSphere:
    kappa = 1.0 / radius
    return RoundSphere(
        kind="sphere",
        dim=dim,
        ambient_dim=dim + 1,
        tubular_radius=0.9 / kappa,
        safe_tubular_radius=0.45 / kappa,
        sff_bound=np.sqrt(dim) / radius,
        projection_lipschitz=2.0 * kappa,
        on_tol=on_tol,
        radius=radius,
    )


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ellipsoid(EmbeddedManifold):
    semi_axes: tuple = (1.0, 1.0, 1.0)
    _axes2: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_axes2", np.asarray(self.semi_axes, float) ** 2)

    def _lagrange_project(self, x):
        """Nearest point p_i = x_i a_i² / (a_i² + λ) with λ the root of the
        constraint equation; vectorized bisection (monotone, deterministic)."""
        a2 = self._axes2
        q = np.sum(x * x / a2, axis=-1)  # >1 outside, <1 inside
        amin2 = a2.min()
        lo = np.where(q >= 1.0, 0.0, -amin2 * (1 - 1e-12))
        amax = np.sqrt(a2.max())
        hi = amax * np.linalg.norm(x, axis=-1) + a2.max()
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            f = np.sum(x * x * a2 / (a2 + mid[..., None]) ** 2, axis=-1)
            take_hi = f > 1.0
            lo = np.where(take_hi, mid, lo)
            hi = np.where(take_hi, hi, mid)
        lam = 0.5 * (lo + hi)
        return x * a2 / (a2 + lam[..., None])

    def project(self, x):
        x = np.asarray(x, float)
        inside = np.sum(x * x / self._axes2, axis=-1) < 1.0
        d = self.distance(x)
        if np.any(inside & (d >= self.tubular_radius)):
            raise OutsideTube("point(s) inside the inward reach margin")
        return self._lagrange_project(x)

    def distance(self, x):
        x = np.asarray(x, float)
        return np.linalg.norm(x - self._lagrange_project(x), axis=-1)

    def normal_space_projector(self, x):
        x = np.asarray(x, float)
        g = x / self._axes2  # gradient of the defining quadric (up to 2)
        n = g / np.linalg.norm(g, axis=-1, keepdims=True)
        return n[..., :, None] * n[..., None, :]

    def normal_part_constant(self):
        # curvature-based bound, conservative
        a2 = self._axes2
        return float(np.sqrt(a2.max()) / a2.min())

    def descriptor(self):
        return {"kind": "ellipsoid", "semi_axes": list(self.semi_axes)}


def ellipsoid(semi_axes, on_tol=DEFAULT_ON_TOL) -> Ellipsoid:
    ax = np.asarray(semi_axes, float)
    kappa = ax.max() / ax.min() ** 2  # max principal curvature
    dim = len(ax) - 1
    return Ellipsoid(
        kind="ellipsoid",
        dim=dim,
        ambient_dim=len(ax),
        tubular_radius=0.45 / kappa,
        safe_tubular_radius=0.225 / kappa,
        sff_bound=float(np.sqrt(2.0) * kappa),
        projection_lipschitz=2.0 * kappa,
        on_tol=on_tol,
        semi_axes=tuple(float(a) for a in ax),
    )


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineSubspace(EmbeddedManifold):
    """span(e_1..e_dim) inside R^ambient_dim; projection zeroes trailing coords."""

    def project(self, x):
        x = np.asarray(x, float).copy()
        x[..., self.dim:] = 0.0
        return x

    def distance(self, x):
        x = np.asarray(x, float)
        return np.linalg.norm(x[..., self.dim:], axis=-1)

    def normal_space_projector(self, x):
        x = np.asarray(x, float)
        pn = np.zeros(x.shape[:-1] + (self.ambient_dim, self.ambient_dim))
        idx = np.arange(self.dim, self.ambient_dim)
        pn[..., idx, idx] = 1.0
        return pn

    def tangent_basis(self, x):
        x = np.asarray(x, float)
        b = np.eye(self.ambient_dim)[: self.dim]
        return np.broadcast_to(b, x.shape[:-1] + b.shape).copy()

    def normal_part_constant(self):
        return 0.0

    def descriptor(self):
        return {"kind": "affine", "dim": self.dim, "ambient_dim": self.ambient_dim}


def affine_subspace(dim: int, ambient_dim: int, on_tol=DEFAULT_ON_TOL) -> AffineSubspace:
    return AffineSubspace(
        kind="affine",
        dim=dim,
        ambient_dim=ambient_dim,
        tubular_radius=np.inf,
        safe_tubular_radius=np.inf,
        sff_bound=0.0,
        projection_lipschitz=0.0,
        on_tol=on_tol,
    )


def from_descriptor(desc: dict) -> EmbeddedManifold:
    kind = desc["kind"]
    if kind == "sphere":
        return round_sphere(int(desc["dim"]), float(desc.get("radius", 1.0)))
    if kind == "ellipsoid":
        return ellipsoid(desc["semi_axes"])
    if kind == "affine":
        return affine_subspace(int(desc["dim"]), int(desc["ambient_dim"]))
    raise ValueError(f"unknown manifold kind {kind!r}")
