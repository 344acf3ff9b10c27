"""Randomized numerical certificate suites for the quantitative inequalities
behind the replacement machinery: the Hardy-type bound for holomorphic
densities, the ODE comparison bound, angular-energy decay and the
differential inequality driving it on flat cylinders, constancy of the
Hopf integrand, and the one-dimensional trace inequality.

Every suite is deterministic given its seed; instance parameters are drawn
once and reports are byte-stable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import dirichlet as dr
from . import dmap as dm
from .dmap import DiscreteMap
from .domains import CylinderDomain, d_axis, d_axis_periodic
from .errors import NoZero, PreconditionFail
from .manifold import round_sphere


@dataclass
class CertificateReport:
    name: str
    instances: int
    worst_margin: float
    passed: bool
    seed: int
    tolerance: float
    details: dict = field(default_factory=dict)
    skipped: int = 0

    def to_json(self) -> str:
        payload = {
            "name": self.name, "seed": self.seed, "instances": self.instances,
            "skipped": self.skipped, "worst_margin": self.worst_margin,
            "tolerance": self.tolerance, "pass": self.passed,
            "details": self.details,
        }
        return json.dumps(payload, sort_keys=True)


# ---------------------------------------------------------------------------
# quadrature helpers (polar Gauss-Legendre x uniform angle: exact for the
# polynomial/trigonometric instances the generators produce)

def _polar_grid(n_r=64, n_theta=256):
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * w
    theta = np.arange(n_theta) * (2 * np.pi / n_theta)
    return r, wr, theta, 2 * np.pi / n_theta


# ---------------------------------------------------------------------------
# Hardy-type bound for holomorphic densities

def wente_hardy_check(zeta_coeffs, cos_coeffs, sin_coeffs,
                      n_r=64, n_theta=256) -> dict:
    """Integrals for h^2 |zeta|^2 <= 8 (int |grad h|^2)(int |zeta|^2) on the
    unit disk, with zeta the polynomial with given complex coefficients and
    h = (1 - r^2) * sum_k r^k (a_k cos k theta + b_k sin k theta)."""
    r, wr, theta, dth = _polar_grid(n_r, n_theta)
    z = r[:, None] * np.exp(1j * theta[None, :])
    zeta = np.zeros_like(z)
    for ck in reversed(zeta_coeffs):
        zeta = zeta * z + ck
    z2 = np.abs(zeta) ** 2
    a = np.asarray(cos_coeffs, float)
    b = np.asarray(sin_coeffs, float)
    ks = np.arange(len(a))
    rk = r[:, None] ** ks[None, :]                      # (n_r, K)
    trig = (a[None, None, :] * np.cos(ks[None, None, :] * theta[None, :, None])
            + b[None, None, :] * np.sin(ks[None, None, :] * theta[None, :, None]))
    q = np.einsum("rk,rtk->rt", rk, np.broadcast_to(trig, (n_r,) + trig.shape[1:]))
    with np.errstate(divide="ignore", invalid="ignore"):
        rk1 = np.where(ks[None, :] > 0, r[:, None] ** np.maximum(ks[None, :] - 1, 0), 0.0)
    q_r = np.einsum("rk,rtk->rt", ks[None, :] * rk1,
                    np.broadcast_to(trig, (n_r,) + trig.shape[1:]))
    dtrig = (-a[None, None, :] * np.sin(ks[None, None, :] * theta[None, :, None])
             + b[None, None, :] * np.cos(ks[None, None, :] * theta[None, :, None]))
    q_t = np.einsum("rk,rtk->rt", ks[None, :] * rk,
                    np.broadcast_to(dtrig, (n_r,) + dtrig.shape[1:]))
    one_m_r2 = (1.0 - r**2)[:, None]
    h = one_m_r2 * q
    h_r = -2.0 * r[:, None] * q + one_m_r2 * q_r
    h_t = one_m_r2 * q_t
    area_w = (wr * r)[:, None] * dth
    lhs = float(np.sum(h**2 * z2 * area_w))
    grad2 = float(np.sum((h_r**2 + np.divide(h_t, r[:, None]) ** 2) * area_w))
    zeta2 = float(np.sum(z2 * area_w))
    rhs = 8.0 * grad2 * zeta2
    return {"lhs": lhs, "grad_h_sq": grad2, "zeta_sq": zeta2,
            "rhs": rhs, "margin": rhs - lhs}


def wente_hardy_suite(seed: int = 0, instances: int = 1000,
                      rel_tol: float = 1e-8) -> CertificateReport:
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(instances):
        deg = int(rng.integers(1, 7))
        zc = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
        k = int(rng.integers(1, 5))
        a = rng.normal(size=k + 1)
        b = rng.normal(size=k + 1)
        b[0] = 0.0
        out = wente_hardy_check(zc, a, b)
        worst = min(worst, out["margin"] / max(out["rhs"], 1e-300))
    base = wente_hardy_check([1.0], [1.0], [0.0])
    ratio = base["lhs"] / (base["grad_h_sq"] * base["zeta_sq"])
    details = {
        "worst_relative_margin": worst,
        "baseline_ratio": ratio,
        "baseline_expected": 1.0 / (6.0 * np.pi),
        "baseline_error": abs(ratio - 1.0 / (6.0 * np.pi)),
    }
    passed = worst >= -rel_tol and details["baseline_error"] <= 1e-6
    return CertificateReport("wente", instances, float(worst), bool(passed),
                             seed, rel_tol, details)


# ---------------------------------------------------------------------------
# ODE comparison bound

def ode_comparison_check(f, a: float, ell: float, fd_tol: float = 1e-6) -> dict:
    """Margin of  int f >= 2 sqrt(2) a sinh(ell / sqrt 2)  for a sampled f on
    [-2 ell, 2 ell] with f'' >= f - a and max f >= 2a on the inner window."""
    f = np.asarray(f, float)
    n = len(f)
    if n % 2 == 0:
        raise ValueError("need an odd number of samples for Simpson")
    h = 4.0 * ell / (n - 1)
    fpp = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    scale = max(np.max(np.abs(f)), a, 1.0)
    if np.min(fpp - (f[1:-1] - a)) < -fd_tol * scale:
        raise PreconditionFail("sampled f'' >= f - a fails on the grid")
    t = np.linspace(-2 * ell, 2 * ell, n)
    inner = np.abs(t) <= ell + 1e-12
    if np.max(f[inner]) < 2 * a * (1 - 1e-12):
        raise PreconditionFail("max of f on the inner window is below 2a")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    integral = float(np.sum(w * f) * h / 3.0)
    bound = 2.0 * np.sqrt(2.0) * a * np.sinh(ell / np.sqrt(2.0))
    return {"integral": integral, "bound": bound, "margin": integral - bound}


def ode_comparison_suite(seed: int = 0, instances: int = 1000,
                         tol: float = 1e-6, n_samples: int = 4097) -> CertificateReport:
    rng = np.random.default_rng(seed)
    worst = np.inf
    skipped = 0
    done = 0
    while done < instances:
        ell = float(rng.uniform(0.5, 2.0))
        a = float(rng.uniform(0.1, 5.0))
        c = float(rng.uniform(1.0, 3.0)) * a
        t0 = float(rng.uniform(-ell, ell))
        d = float(rng.uniform(0.0, 1.0)) * a
        kap = float(rng.uniform(1.0, 3.0))
        t1 = float(rng.uniform(-2 * ell, 2 * ell))
        t = np.linspace(-2 * ell, 2 * ell, n_samples)
        f = a + c * np.cosh(t - t0) + d * np.cosh(kap * (t - t1))
        try:
            out = ode_comparison_check(f, a, ell)
        except PreconditionFail:
            skipped += 1
            continue
        worst = min(worst, out["margin"])
        done += 1
    ell0, a0 = 1.0, 1.0
    t = np.linspace(-2.0, 2.0, n_samples)
    base = ode_comparison_check(a0 + np.cosh(t), a0, ell0)
    exact = 4.0 + 2.0 * np.sinh(2.0)
    details = {
        "baseline_integral": base["integral"],
        "baseline_exact": exact,
        "baseline_bound": base["bound"],
        "baseline_bound_exact": 2 * np.sqrt(2) * np.sinh(1 / np.sqrt(2)),
        "baseline_error": abs(base["integral"] - exact) / exact,
    }
    passed = worst >= -tol and details["baseline_error"] <= 1e-6
    return CertificateReport("ode-comparison", done, float(worst), bool(passed),
                             seed, tol, details, skipped=skipped)


# ---------------------------------------------------------------------------
# cylinder maps: solves, angular-energy profile, decay, Hopf constancy

def cylinder_domain(ell: float, n_t: int = 129, n_theta: int = 96,
                    halves: int = 3) -> CylinderDomain:
    return CylinderDomain(-halves * ell, halves * ell, n_t, n_theta)


def solve_cylinder_map(dom: CylinderDomain, target, trace_low, trace_high,
                       settings: dr.SolverSettings = None) -> DiscreteMap:
    """Harmonic map with the given end-circle traces (arrays (n_theta, N))."""
    settings = settings or dr.SolverSettings(residual_tol=1e-13,
                                             max_sweeps=200_000, overrelax=1.9,
                                             small_energy=np.inf)
    lo = np.asarray(trace_low, float)
    hi = np.asarray(trace_high, float)
    vals = np.empty((dom.n_t, dom.n_theta, lo.shape[-1]))
    s = np.linspace(0.0, 1.0, dom.n_t)[:, None, None]
    vals[:] = target.project((1 - s) * lo[None] + s * hi[None])
    u0 = DiscreteMap(dom, target, [vals])
    return dr.solve_dirichlet(dr.DirichletProblem(u0, "cylinder"), settings)


def theta_energy_profile(u: DiscreteMap, sff_bound: float = None) -> dict:
    """Per-level angular energy f(t), its second differences, and the margins
    of  f'' >= 1.5 f - 2 sup|A|^2 * int |grad u|^4  at interior levels."""
    dom = u.domain
    sff = u.target.sff_bound if sff_bound is None else sff_bound
    ut = d_axis(u.values[0], dom.h_t, 0)
    uth = d_axis_periodic(u.values[0], dom.h_theta, 1)
    f = np.sum(uth**2, axis=(1, 2)) * dom.h_theta
    grad2 = np.sum(ut**2, axis=-1) + np.sum(uth**2, axis=-1)
    quart = np.sum(grad2**2, axis=1) * dom.h_theta
    fpp = (f[2:] - 2 * f[1:-1] + f[:-2]) / dom.h_t**2
    rhs = 1.5 * f[1:-1] - 2.0 * sff**2 * quart[1:-1]
    return {"t": dom.t, "f": f, "fpp": fpp, "rhs": rhs,
            "margins": fpp - rhs, "scale": float(np.max(f) + 1e-300)}


def theta_energy_decay_check(u: DiscreteMap, ell: float, delta: float,
                             eps2: float = 0.25) -> dict:
    """Compare the inner angular energy with delta times the double-window
    total energy; the small-energy gate eps2 excludes out-of-regime maps."""
    dom = u.domain
    energy = dm.energy(u)
    if energy > eps2:
        return {"applicable": False, "energy": float(energy), "eps2": eps2}
    ut = d_axis(u.values[0], dom.h_t, 0)
    uth = d_axis_periodic(u.values[0], dom.h_theta, 1)
    w = dom.flat_weights
    inner = np.abs(dom.t) <= ell + 1e-12
    double = np.abs(dom.t) <= 2 * ell + 1e-12
    num = float(np.sum((uth[inner] ** 2).sum(-1) * w[inner]))
    den = float(np.sum(((ut**2 + uth**2).sum(-1) * w)[double]))
    ratio = num / max(den, 1e-300)
    return {"applicable": True, "energy": float(energy), "ratio": ratio,
            "delta": delta, "pass": bool(ratio < delta)}


def hopf_constancy(u: DiscreteMap) -> dict:
    """Deviation of c(t) = int_t (|u_t|^2 - |u_theta|^2) from constancy, plus
    the complex Hopf field and its discrete dbar residual."""
    dom = u.domain
    ut = d_axis(u.values[0], dom.h_t, 0)
    uth = d_axis_periodic(u.values[0], dom.h_theta, 1)
    integrand = np.sum(ut**2, -1) - np.sum(uth**2, -1)
    c = integrand.sum(axis=1) * dom.h_theta
    interior = slice(2, -2)
    ci = c[interior]
    mean = float(np.mean(ci))
    deviation = float(np.max(np.abs(ci - mean))) if len(ci) else 0.0
    phi = integrand - 2j * np.sum(ut * uth, -1)
    dbar = 0.5 * (d_axis(phi.real, dom.h_t, 0) - d_axis_periodic(phi.imag, dom.h_theta, 1)
                  + 1j * (d_axis(phi.imag, dom.h_t, 0) + d_axis_periodic(phi.real, dom.h_theta, 1)))
    scale = float(np.max(np.abs(phi)) + 1e-300)
    return {"c": c, "mean": mean, "deviation": deviation,
            "hopf_field": phi, "dbar_max": float(np.max(np.abs(dbar[interior, :]))),
            "scale": scale}


def cylinder_decomposition_report(u: DiscreteMap, ell: float, mu: float,
                                  delta: float,
                                  settings: dr.SolverSettings = None) -> dict:
    """Unit-subcylinder decomposition: a subcylinder is good when replacing
    its interior by the harmonic solve moves the gradient by at most mu
    times the total energy; angular decay is summed over the good ones and
    the bad ones are charged to the replacement deviation."""
    dom = u.domain
    settings = settings or dr.SolverSettings(residual_tol=1e-11,
                                             max_sweeps=50_000, overrelax=1.8,
                                             small_energy=np.inf)
    total = 2.0 * dm.energy(u)
    n_sub = max(int((dom.t1 - dom.t0) / ell) - 2, 1)
    good, bad = [], []
    inner_theta = 0.0
    for k in range(n_sub):
        a = dom.t0 + k * ell
        b = a + 3 * ell
        sel = (dom.t >= a - 1e-12) & (dom.t <= b + 1e-12)
        ii = np.nonzero(sel)[0]
        block = u.values[0][ii[0]:ii[-1] + 1].copy()
        interior = np.ones(block.shape[:2], bool)
        interior[0, :] = interior[-1, :] = False
        sub = block.copy()
        dr.relax(sub, interior, u.target, settings,
                 1.0 / dom.h_t**2, 1.0 / dom.h_theta**2, periodic_y=True)
        gap = dr.masked_grad_square(block - sub, interior,
                                    1.0 / dom.h_t**2, 1.0 / dom.h_theta**2,
                                    periodic_y=True) * dom.h_t * dom.h_theta
        mid = (np.abs(dom.t - (a + 1.5 * ell)) <= 0.5 * ell)
        uth = d_axis_periodic(u.values[0], dom.h_theta, 1)
        th_energy = float(np.sum((uth[mid] ** 2).sum(-1) * dom.flat_weights[mid]))
        entry = {"window": (float(a), float(b)), "gap": float(gap),
                 "theta_energy": th_energy}
        if gap <= mu * total:
            good.append(entry)
            inner_theta += th_energy
        else:
            bad.append(entry)
    bad_gap = sum(e["gap"] for e in bad)
    measured = inner_theta / max(total, 1e-300)
    return {"good": good, "bad": bad, "total_energy": total,
            "good_theta_fraction": measured,
            "bound_shape": 6 * delta + (10.0 / mu) * (bad_gap / max(total, 1e-300)),
            "n_subcylinders": n_sub}


# ---------------------------------------------------------------------------
# trace inequality on the circle

def wirtinger_check(f, zero_tol: float = 1e-9) -> dict:
    """Margin of  int |f|^2 <= 4 int |f'|^2  for a sampled trace on the circle
    that vanishes at some sample node."""
    f = np.asarray(f, float)
    if f.ndim == 1:
        f = f[:, None]
    m = f.shape[0]
    mags = np.linalg.norm(f, axis=-1)
    if np.min(mags) > zero_tol * (1.0 + np.max(mags)):
        raise NoZero("trace does not vanish at any sample")
    k = np.fft.rfftfreq(m, d=1.0 / m)
    F = np.fft.rfft(f, axis=0)
    fp = np.fft.irfft(1j * k[:, None] * F, n=m, axis=0)
    dth = 2 * np.pi / m
    int_f2 = float(np.sum(f**2) * dth)
    int_fp2 = float(np.sum(fp**2) * dth)
    return {"int_f2": int_f2, "int_fp2": int_fp2,
            "margin": 4.0 * int_fp2 - int_f2}


def wirtinger_suite(seed: int = 0, instances: int = 1000,
                    tol: float = 1e-10, m: int = 256) -> CertificateReport:
    rng = np.random.default_rng(seed)
    theta = np.arange(m) * (2 * np.pi / m)
    worst = np.inf
    for _ in range(instances):
        k = int(rng.integers(1, 9))
        a = rng.normal(size=k + 1)
        b = rng.normal(size=k + 1)
        g = sum(a[j] * np.cos(j * theta) + b[j] * np.sin(j * theta)
                for j in range(k + 1))
        g = g - g[int(rng.integers(0, m))]
        out = wirtinger_check(g)
        worst = min(worst, out["margin"])
    t0 = np.sin(theta)
    base = wirtinger_check(t0)
    details = {"baseline_int_f2": base["int_f2"], "baseline_int_fp2": base["int_fp2"],
               "baseline_margin": base["margin"], "baseline_expected_margin": 3 * np.pi}
    passed = worst >= -tol and abs(base["margin"] - 3 * np.pi) <= 1e-9
    return CertificateReport("wirtinger", instances, float(worst), bool(passed),
                             seed, tol, details)


# ---------------------------------------------------------------------------
# solver-backed suites

def hopf_suite(seed: int = 0, resolutions=((65, 64), (129, 128), (257, 256)),
               cap_angle: float = 0.3, ell: float = 1.0,
               tol: float = 1e-4) -> CertificateReport:
    """Harmonic cylinder maps into the unit 2-sphere from matching cap-circle
    traces; checks constancy of the Hopf integrand and its second-order
    decay under grid refinement."""
    s2 = round_sphere(2, 1.0)
    devs = []
    for (n_t, n_th) in resolutions:
        dom = CylinderDomain(-ell, ell, n_t, n_th)
        th = np.arange(n_th) * (2 * np.pi / n_th)
        trace = np.stack([np.sin(cap_angle) * np.cos(th),
                          np.sin(cap_angle) * np.sin(th),
                          np.full_like(th, np.cos(cap_angle))], axis=-1)
        u = solve_cylinder_map(dom, s2, trace, trace)
        rep = hopf_constancy(u)
        scale = max(abs(rep["mean"]), rep["scale"] * 2 * np.pi)
        devs.append(rep["deviation"] / max(scale, 1e-300))
    orders = [np.log2(devs[i] / devs[i + 1]) for i in range(len(devs) - 1)]
    finest = devs[-1]
    details = {"relative_deviations": devs, "refinement_orders": orders,
               "seed_unused": seed}
    passed = finest <= tol and all(o >= 1.5 for o in orders)
    return CertificateReport("hopf", len(devs), float(-finest), bool(passed),
                             seed, tol, details)


def theta_decay_suite(seed: int = 0, ells=(1.5, 3.0), amp: float = 0.05,
                      eps2: float = 0.25, delta: float = 0.1) -> CertificateReport:
    """Small-amplitude single-mode boundary data on lengthening cylinders:
    the interior angular-energy fraction must fall under delta and shrink
    as the cylinder doubles.  The details carry a small dyadic feasibility
    scan over (energy gate, window length)."""
    s2 = round_sphere(2, 1.0)
    ratios = []
    energies = []
    for ell in ells:
        dom = cylinder_domain(ell, n_t=int(48 * ell) * 2 + 1, n_theta=64)
        th = dom.theta
        base = np.array([0.0, 0.0, 1.0])
        trace = base[None, :] + amp * np.stack(
            [np.cos(th), np.zeros_like(th), np.zeros_like(th)], axis=-1)
        u = solve_cylinder_map(dom, s2, trace, trace)
        out = theta_energy_decay_check(u, ell, delta, eps2)
        if not out["applicable"]:
            return CertificateReport("theta-decay", 0, 0.0, False, seed, delta,
                                     {"error": "energy gate failed", **out})
        ratios.append(out["ratio"])
        energies.append(out["energy"])
    scan = [{"eps2": e2, "ell": ell, "applicable": bool(en <= e2),
             "feasible": bool(en <= e2 and r < delta), "ratio": r}
            for e2 in (0.125, 0.25, 0.5)
            for ell, r, en in zip(ells, ratios, energies)]
    details = {"ells": list(ells), "ratios": ratios, "delta": delta,
               "energies": energies, "scan": scan,
               "monotone_decreasing": bool(all(a > b for a, b in
                                               zip(ratios, ratios[1:])))}
    passed = all(r < delta for r in ratios) and details["monotone_decreasing"]
    return CertificateReport("theta-decay", len(ratios),
                             float(delta - max(ratios)), bool(passed),
                             seed, delta, details)


def harmonic_hardy_suite(seed: int = 0, instances: int = 25) -> CertificateReport:
    """Measured-only companion of the holomorphic-density bound: the ratio
    int h^2 |grad v|^2 / [(int |grad h|^2)(int |grad v|^2)] over solver
    harmonic maps v into the unit 2-sphere with random interior test fields
    h.  The sharp constant is unknown, so the suite archives the ratio
    distribution and only asserts finiteness."""
    from . import dmap as dmod
    from .domains import SphereDomain
    rng = np.random.default_rng(seed)
    dom = SphereDomain()
    s2 = round_sphere(2, 1.0)
    settings = dr.SolverSettings(residual_tol=1e-12, max_sweeps=30_000)
    ratios = []
    while len(ratios) < instances:
        cx, cy = float(rng.uniform(-0.15, 0.15)), float(rng.uniform(-0.15, 0.15))
        rad = float(rng.uniform(0.15, 0.28))
        b = dmod.Ball(0, (cx, cy), rad)
        amp = float(rng.uniform(0.1, 0.3))
        vec = rng.normal(size=3)

        def fn(p):
            x, y = dom.sphere_to_chart(0, p)
            x = np.where(np.isfinite(x), x, 1e6)
            y = np.where(np.isfinite(y), y, 1e6)
            d2 = ((x - cx) ** 2 + (y - cy) ** 2) / rad**2
            w = np.where(d2 < 1, (1 - np.minimum(d2, 1)) ** 3, 0.0)
            return np.array([0.0, 0.0, -1.0]) + amp * w[..., None] * vec

        u = dmod.sphere_map(dom, s2, fn)
        v = dr.solve_dirichlet(dr.DirichletProblem(u, [b]), settings)
        gx, gy = dmod.chart_differential(v, 0)
        grad_v2 = np.sum(gx * gx, -1) + np.sum(gy * gy, -1)
        mask = dmod.ball_mask(dom, b)
        px = float(rng.uniform(-0.5, 0.5) * rad + cx)
        py = float(rng.uniform(-0.5, 0.5) * rad + cy)
        wid = float(rng.uniform(0.3, 0.9)) * rad
        d2 = ((dom.X - px) ** 2 + (dom.Y - py) ** 2) / wid**2
        h = np.where(d2 < 1, (1 - np.minimum(d2, 1)) ** 3, 0.0)
        h[~mask] = 0.0
        from .domains import d_axis
        hx = d_axis(h, dom.h, 0)
        hy = d_axis(h, dom.h, 1)
        cell = dom.h**2
        num = float(np.sum((h**2 * grad_v2)[mask]) * cell)
        den_h = float(np.sum((hx**2 + hy**2)[mask]) * cell)
        den_v = float(np.sum(grad_v2[mask]) * cell)
        if den_h * den_v <= 1e-18:
            continue
        ratios.append(num / (den_h * den_v))
    arr = np.array(ratios)
    details = {"max_ratio": float(arr.max()), "median_ratio": float(np.median(arr)),
               "min_ratio": float(arr.min()), "holomorphic_case_constant": 8.0}
    passed = bool(np.all(np.isfinite(arr)))
    return CertificateReport("harmonic-hardy", instances, float(-arr.max()),
                             passed, seed, float("inf"), details)


def convexity_suite(seed: int = 0, instances: int = 100, eps1: float = 2.0,
                    tol: float = 1e-6) -> CertificateReport:
    """Randomized small-energy Dirichlet solves on chart balls of the sphere
    with projected interior perturbations: the convexity gap must be
    nonnegative at solver tolerance."""
    from .domains import SphereDomain
    from .errors import EnergyTooLarge
    rng = np.random.default_rng(seed)
    dom = SphereDomain()
    s2 = round_sphere(2, 1.0)
    settings = dr.SolverSettings(residual_tol=1e-12, max_sweeps=30_000,
                                 small_energy=eps1)
    scale = min(1.0, np.sqrt(eps1 / 2.0))
    worst = np.inf
    for _ in range(instances):
        base = np.array([0.0, 0.0, -1.0]) + 0.35 * rng.normal(size=3)
        base /= np.linalg.norm(base)
        if base[2] > -0.5:
            base = np.array([0.0, 0.0, -1.0])
        cx, cy = (float(v) for v in dom.sphere_to_chart(0, base))
        rad = float(rng.uniform(0.15, 0.3))
        b = dm.Ball(0, (cx, cy), rad)
        if not dm.ball_fits_chart(dom, b):
            continue
        amp = float(rng.uniform(0.05, 0.35)) * scale
        vec = rng.normal(size=3)
        px, py = float(rng.uniform(-rad, rad) + cx), float(rng.uniform(-rad, rad) + cy)
        wid = float(rng.uniform(0.3, 0.9)) * rad

        def fn(p):
            X, Y = dom.sphere_to_chart(0, p)
            X = np.where(np.isfinite(X), X, 1e6)
            Y = np.where(np.isfinite(Y), Y, 1e6)
            d2 = ((X - px) ** 2 + (Y - py) ** 2) / wid**2
            bump = np.where(d2 < 1, (1 - np.minimum(d2, 1)) ** 3, 0.0)
            return base + amp * bump[..., None] * vec

        u = dm.sphere_map(dom, s2, fn)
        h = float(rng.uniform(0.01, 0.05))
        try:
            v = dr.solve_dirichlet(dr.DirichletProblem(u, [b]), settings)
        except EnergyTooLarge:
            continue  # instance outside the candidate's admissible regime
        qx, qy = float(cx + rng.uniform(-0.3, 0.3) * rad), float(cy + rng.uniform(-0.3, 0.3) * rad)
        qw = float(rng.uniform(0.2, 0.6)) * rad
        X, Y = dom.X, dom.Y
        d2 = ((X - qx) ** 2 + (Y - qy) ** 2) / qw**2
        inner = np.where(d2 < 1, (1 - np.minimum(d2, 1)) ** 3, 0.0)
        pert = v.copy()
        pert.values[0] = s2.project(
            pert.values[0] + h * inner[..., None] * rng.normal(size=3))
        gap = dr.convexity_gap(pert, v, [b])
        worst = min(worst, gap)
    passed = worst >= -tol
    return CertificateReport("convexity", instances, float(worst), bool(passed),
                             seed, tol, {"eps1": eps1})


SUITES = {
    "wente": wente_hardy_suite,
    "ode-comparison": ode_comparison_suite,
    "wirtinger": wirtinger_suite,
    "hopf": hopf_suite,
    "theta-decay": theta_decay_suite,
    "convexity": convexity_suite,
    "harmonic-hardy": harmonic_hardy_suite,
}
