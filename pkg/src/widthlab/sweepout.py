"""Sweepouts of 2-spheres, width estimates, scheduled tightening by harmonic
replacement, and the 1-dimensional curve-shortening mode.

A sweepout is a finite family of sphere maps over t = i/T with constant
endpoint slices.  Tightening repeatedly (a) finds ball families on the
high-energy slices where replacement measurably drops energy, (b) extends
each family over an interval of t on which it keeps working, (c) prunes
the intervals so every high-energy t is covered while at most two families
are active anywhere, and (d) applies the replacements with trapezoidal
radius envelopes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dirichlet as dr
from . import dmap as dm
from .dmap import BallFamily, DiscreteMap
from .domains import SphereDomain
from .errors import EnergyTooLarge, KindUnknown, ScheduleEmpty
from .manifold import round_sphere


@dataclass
class Sweepout:
    slices: list            # T+1 DiscreteMaps
    target: object
    degree: int = 0

    @property
    def n_slices(self):
        return len(self.slices)

    @property
    def times(self):
        return np.linspace(0.0, 1.0, self.n_slices)

    def copy(self):
        return Sweepout([s.copy() for s in self.slices], self.target, self.degree)


@dataclass
class WidthEstimate:
    w_energy: float
    w_area: float
    argmax_t: int
    per_slice_energy: np.ndarray
    per_slice_area: np.ndarray


@dataclass
class Envelope:
    """Trapezoidal radius profile: 1 on [a, b], ramping to 0 at the support
    endpoints, zero outside."""
    support: tuple   # (s0, s1)
    plateau: tuple   # (a, b)

    def __call__(self, t):
        s0, s1 = self.support
        a, b = self.plateau
        xs = [s0, a, b, s1]
        ys = [0.0, 1.0, 1.0, 0.0]
        if s0 == a:
            xs, ys = xs[1:], ys[1:]
        if s1 == b:
            xs, ys = xs[:-1], ys[:-1]
        return float(np.interp(t, xs, ys, left=0.0, right=0.0))


@dataclass
class BallSchedule:
    families: list           # BallFamily per stage
    envelopes: list          # Envelope per stage
    improvements: list       # measured half-family drop at the seed slice

    def radii_at(self, t):
        return [env(t) for env in self.envelopes]


@dataclass
class IterationRow:
    iteration: int
    w_energy: float
    w_area: float
    argmax_t: int
    total_drop: float
    max_improvement: float
    stages: int
    mollified: int
    flagged: int


@dataclass
class TighteningReport:
    rows: list = field(default_factory=list)
    final_width: WidthEstimate = None
    harmonic_checks: list = field(default_factory=list)
    varifold_distance: float = None
    stopped: str = ""

    def w_energy_series(self):
        return np.array([r.w_energy for r in self.rows])


# ---------------------------------------------------------------------------
# fixtures

def _latitude_values(dom, t, radius, warp=None):
    s, c = np.sin(np.pi * t), np.cos(np.pi * t)
    vals = []
    for ch in (0, 1):
        p = dom.points[ch]
        if warp is not None:
            p = warp(p, t)
        v = np.concatenate([s * p, np.full(p.shape[:2] + (1,), c)], axis=-1)
        vals.append(radius * v)
    return vals


def _chart0_bump_warp(center, rho, direction, amp_of_t):
    """Compactly supported chart-0 shear, a diffeomorphism for small amplitudes."""
    cx, cy = center
    dx, dy = direction

    def warp(p, t):
        a = amp_of_t(t)
        if a == 0.0:
            return p
        X, Y = SphereDomain.sphere_to_chart(0, p)
        bad = ~np.isfinite(X) | ~np.isfinite(Y)
        Xs = np.where(bad, 10.0 + cx + rho, X)
        Ys = np.where(bad, 10.0 + cy + rho, Y)
        d2 = ((Xs - cx) ** 2 + (Ys - cy) ** 2) / rho**2
        amp = a * np.where(d2 < 1.0, (1.0 - np.minimum(d2, 1.0)) ** 3, 0.0)
        Xn = Xs + amp * dx
        Yn = Ys + amp * dy
        moved = SphereDomain.chart_to_sphere(0, Xn, Yn)
        return np.where((amp > 0)[..., None], moved, p)

    return warp


def standard_sweepout(kind: str, target, dom: SphereDomain = None,
                      n_slices: int = 64, amp: float = 0.35,
                      bump_center=(0.15, -0.1), bump_rho: float = 0.35,
                      t_profile: str = "global", n_vertices: int = 96):
    """Reference sweepout fixtures.

    latitude-s3: x -> (sin(pi t) x, cos(pi t)), the width-4*pi*R^2 sweepout.
    perturbed-latitude-s3: latitude composed with a t-dependent compactly
      supported chart-0 diffeomorphism (pure domain reparametrization, so
      areas are untouched while energies rise).
    curve-latitude-s2: latitude circles of the round 2-sphere, for the
      curve-shortening mode; returns a CurveSweepout.
    """
    kind = kind.lower()
    if kind == "curve-latitude-s2":
        return curve_latitude_sweepout(target, n_slices, n_vertices)
    dom = dom or SphereDomain()
    ts = np.linspace(0.0, 1.0, n_slices + 1)
    radius = getattr(target, "radius", 1.0)
    if kind == "latitude-s3":
        warp = None
    elif kind == "perturbed-latitude-s3":
        if t_profile == "global":
            amp_of_t = lambda t: amp * np.sin(np.pi * t)
        elif t_profile == "local":
            amp_of_t = lambda t: amp * max(0.0, 1.0 - ((t - 0.5) / 0.15) ** 2) ** 3
        else:
            raise KindUnknown(f"t_profile {t_profile!r}")
        warp = _chart0_bump_warp(bump_center, bump_rho, (1.0, -0.6), amp_of_t)
    else:
        raise KindUnknown(kind)
    slices = []
    for t in ts:
        vals = _latitude_values(dom, t, radius, warp)
        u = DiscreteMap(dom, target, vals)
        if warp is not None and 0 < t < 1:
            dm.sync_owner(u)
        slices.append(u)
    return Sweepout(slices, target, degree=1)


# ---------------------------------------------------------------------------
# width and degree

def width_estimate(s: Sweepout) -> WidthEstimate:
    es = np.array([dm.energy(u) for u in s.slices])
    ar = np.array([dm.area(u) for u in s.slices])
    return WidthEstimate(float(es.max()), float(ar.max()), int(es.argmax()), es, ar)


def continuity_gap(s: Sweepout) -> float:
    return max(dm.c0_w12_distance(a, b) for a, b in zip(s.slices, s.slices[1:]))


def numerical_degree(s: Sweepout) -> float:
    """Degree of the induced 3-sphere map: pullback volume over Vol(S^3_R)."""
    dom = s.slices[0].domain
    radius = getattr(s.target, "radius", 1.0)
    T = s.n_slices - 1
    dt = 1.0 / T
    from .domains import d_axis
    total = 0.0
    for c in (0, 1):
        F = np.stack([u.values[c] for u in s.slices])  # (T+1, n, n, 4)
        Ft = np.gradient(F, dt, axis=0)
        FX = d_axis(F, dom.h, 1)
        FY = d_axis(F, dom.h, 2)
        mats = np.stack([F / radius, FX, FY, Ft], axis=-1)
        dets = np.linalg.det(mats)
        wt = np.full(F.shape[0], dt)
        wt[0] = wt[-1] = dt / 2
        total += np.sum(dets * dom.flat_weights[c][None, :, :] * wt[:, None, None])
    return float(total / (2 * np.pi**2 * radius**3))


# ---------------------------------------------------------------------------
# schedule construction

def _improvement_tol(w: float) -> float:
    return max(1e-7, 1e-6 * w)


def select_ball_schedule(s: Sweepout, eps1: float = 2.0,
                         budget: dr.SamplerBudget = None,
                         settings: dr.SolverSettings = None) -> BallSchedule:
    """Families plus radius envelopes covering the high-energy slices.

    For every uncovered high-energy slice, the replacement sampler proposes
    a family whose measured half-scale drop is positive; the family's
    interval grows while the drop persists at half strength and the family
    energy stays under eps1/3.  The finite cover is pruned so each closed
    interval meets at most two others, and envelope supports are truncated
    so at most two radii are positive at any t.
    """
    budget = budget or dr.SamplerBudget()
    settings = settings or dr.SolverSettings(small_energy=eps1)
    T = s.n_slices - 1
    ts = s.times
    es = np.array([dm.energy(u) for u in s.slices])
    w = float(es.max())
    tol = _improvement_tol(w)
    high = [i for i in range(s.n_slices) if es[i] >= w / 2]
    high.sort(key=lambda i: (-es[i], i))  # most energetic slices pick first
    dens = [None] * s.n_slices
    intervals = []  # (a_idx, b_idx, fam, seed_drop)
    covered = np.zeros(s.n_slices, bool)
    for i in high:
        if covered[i]:
            continue
        drop, fam, _ = dr.energy_improvement(s.slices[i], eps1 / 4.0, budget,
                                             settings, full=True)
        if fam is None or drop <= tol:
            continue  # harmonic at tolerance: exempt
        a = b = i
        gate = min(eps1 / 8.0, drop / 2.0)
        while a - 1 >= 0 and _transfers(s, dens, a - 1, i, fam, eps1, gate):
            a -= 1
        while b + 1 <= T and _transfers(s, dens, b + 1, i, fam, eps1, gate):
            b += 1
        covered[a:b + 1] = True
        intervals.append([a, b, fam, drop])
    if not intervals:
        raise ScheduleEmpty("no improving family found on the high-energy slices")
    kept = _prune_cover(intervals)
    envelopes = _build_envelopes(kept, s, eps1, ts, T)
    return BallSchedule([iv[2] for iv in kept], envelopes, [iv[3] for iv in kept])


def _slice_density(s: Sweepout, dens, i):
    if dens[i] is None:
        dens[i] = [dm.energy_density(s.slices[i], c) for c in (0, 1)]
    return dens[i]


def _transfers(s: Sweepout, dens, j, i, fam, eps1, gate):
    """Neighbor slice j inherits slice i's improving family: the family
    energy bound holds at j and the energy densities are L1-close enough
    that the measured drop carries over at half strength."""
    if dm.energy(s.slices[j], fam) > eps1 / 3.0 * 0.999:
        return False
    dom = s.slices[0].domain
    di = _slice_density(s, dens, i)
    dj = _slice_density(s, dens, j)
    l1 = sum(float(np.sum(dom.flat_weights[c] * np.abs(di[c] - dj[c])))
             for c in (0, 1))
    return l1 <= gate


def _prune_cover(intervals):
    """Covering-recipe pruning: drop intervals inside the union of two
    others; among intervals with an endpoint inside the current one, keep
    only the extreme overlapper on each side."""
    items = [list(iv) for iv in intervals]
    alive = [True] * len(items)
    order = sorted(range(len(items)),
                   key=lambda k: (items[k][1], -items[k][0]), reverse=True)
    del order
    k = 0
    while k < len(items):
        if not alive[k]:
            k += 1
            continue
        a, b = items[k][0], items[k][1]
        others = [j for j in range(len(items)) if alive[j] and j != k]
        dropped = False
        for x in others:
            for y in others:
                if x >= y:
                    continue
                lo = min(items[x][0], items[y][0])
                hi = max(items[x][1], items[y][1])
                joined = (items[x][1] + 1 >= items[y][0]
                          and items[y][1] + 1 >= items[x][0])
                if joined and lo <= a and b <= hi:
                    alive[k] = False
                    dropped = True
                    break
            if dropped:
                break
        if dropped:
            k += 1
            continue
        lefties = [j for j in others if a <= items[j][0] <= b]
        if lefties:
            best = max(lefties, key=lambda j: (items[j][1], -items[j][0]))
            for j in lefties:
                if j != best:
                    alive[j] = False
        others = [j for j in range(len(items)) if alive[j] and j != k]
        righties = [j for j in others if a <= items[j][1] <= b]
        if righties:
            best = min(righties, key=lambda j: (items[j][0], -items[j][1]))
            for j in righties:
                if j != best:
                    alive[j] = False
        k += 1
    return [items[j] for j in range(len(items)) if alive[j]]


def _build_envelopes(kept, s, eps1, ts, T):
    kept.sort(key=lambda iv: (iv[0], iv[1]))
    n = len(kept)
    supports = []
    for j, (a, b, fam, _) in enumerate(kept):
        half = max(b - a, 1)
        lo = a
        while lo > max(0, a - half):
            if dm.energy(s.slices[lo - 1], fam) > eps1 / 3.0 * 0.999:
                break
            lo -= 1
        hi = b
        while hi < min(T, b + half):
            if dm.energy(s.slices[hi + 1], fam) > eps1 / 3.0 * 0.999:
                break
            hi += 1
        supports.append([lo, hi])
    # zero on non-adjacent closed intervals, and keep next-nearest supports
    # from sharing interior points (at most two active radii anywhere)
    for j in range(n):
        aj, bj = kept[j][0], kept[j][1]
        for k in range(n):
            if k == j:
                continue
            ak, bk = kept[k][0], kept[k][1]
            if ak <= bj + 1 and bk + 1 >= aj:
                continue  # closed intervals touch or overlap: adjacent
            if ak > bj:
                supports[j][1] = min(supports[j][1], ak - 1)
            if bk < aj:
                supports[j][0] = max(supports[j][0], bk + 1)
    for j in range(n - 2):
        bj = kept[j][1]
        ak = kept[j + 2][0]
        if supports[j][1] >= supports[j + 2][0]:
            mid = (bj + ak) // 2
            supports[j][1] = min(supports[j][1], mid)
            supports[j + 2][0] = max(supports[j + 2][0], mid + 1)
    envs = []
    for (a, b, _, _), (lo, hi) in zip(kept, supports):
        envs.append(Envelope(support=(ts[max(lo, 0)] - (0.0 if lo > 0 else 1e-9),
                                      ts[min(hi, T)] + (0.0 if hi < T else 1e-9)),
                             plateau=(ts[a], ts[b])))
    return envs


# ---------------------------------------------------------------------------
# tightening

def tighten_once(s: Sweepout, sched: BallSchedule,
                 settings: dr.SolverSettings = None, jobs: int = 1):
    """Apply the schedule's replacement stages in order; per-slice energy is
    non-increasing and untouched slices are bit-identical.  Within a stage
    each slice is touched by at most one family, so slices are processed
    independently (in parallel when jobs > 1) and aggregated in slice order.
    """
    settings = settings or dr.SolverSettings()
    out = Sweepout(list(s.slices), s.target, s.degree)
    ts = out.times
    total_drop = 0.0
    flagged = 0

    def one(i, fam, r):
        try:
            return i, dr.harmonic_replace(out.slices[i], fam, rho=r, s=settings)
        except EnergyTooLarge:
            return i, None

    for fam, env in zip(sched.families, sched.envelopes):
        work = [(i, fam, env(t)) for i, t in enumerate(ts) if env(t) > 0.0]
        if jobs > 1 and len(work) > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(lambda w: one(*w), work))
        else:
            results = [one(*w) for w in work]
        new_slices = list(out.slices)
        for i, res in results:
            if res is None or not res.converged:
                flagged += 1
                continue
            new_slices[i] = res.map
            total_drop += res.energy_drop
        out = Sweepout(new_slices, s.target, s.degree)
    return out, total_drop, flagged


def tighten(s: Sweepout, max_iters: int = 30, plateau_tol: float = 1e-4,
            eps1: float = 2.0, budget: dr.SamplerBudget = None,
            settings: dr.SolverSettings = None, mollify_radius: float = 0.03,
            mollify_threshold: float = 0.1, jobs: int = 1,
            reference_varifold=None, harmonic_check_budget=None) -> tuple:
    """Iterate schedule selection and replacement until the width plateaus.

    Returns (tightened sweepout, TighteningReport).  Endpoint slices are
    never touched.  Slices are smoothed only when their second differences
    are rough at grid scale, so a converged sweepout is left alone.
    """
    budget = budget or dr.SamplerBudget()
    settings = settings or dr.SolverSettings(small_energy=eps1)
    report = TighteningReport()
    cur = s.copy()
    w_prev = None
    stall = 0
    for it in range(1, max_iters + 1):
        mollified = 0
        for i in range(1, cur.n_slices - 1):
            if _roughness(cur.slices[i]) > mollify_threshold:
                cur.slices[i] = dm.mollify(cur.slices[i], mollify_radius)
                mollified += 1
        try:
            sched = select_ball_schedule(cur, eps1, budget, settings)
        except ScheduleEmpty:
            report.stopped = "schedule-empty"
            break
        cur, drop, flagged = tighten_once(cur, sched, settings, jobs=jobs)
        west = width_estimate(cur)
        report.rows.append(IterationRow(
            iteration=it, w_energy=west.w_energy, w_area=west.w_area,
            argmax_t=west.argmax_t, total_drop=float(drop),
            max_improvement=float(max(sched.improvements)),
            stages=len(sched.families), mollified=mollified, flagged=flagged))
        if w_prev is not None and abs(w_prev - west.w_energy) < plateau_tol * west.w_energy:
            stall += 1
            if stall >= 3:
                report.stopped = "plateau"
                break
        else:
            stall = 0
        w_prev = west.w_energy
    final = width_estimate(cur)
    report.final_width = final
    for i in range(cur.n_slices):
        if final.per_slice_energy[i] >= 0.95 * final.w_energy:
            chk = almost_harmonic_check(cur.slices[i], eps0=eps1 / 2,
                                        budget=harmonic_check_budget or budget,
                                        settings=settings)
            report.harmonic_checks.append((i, chk))
    if reference_varifold is not None:
        from . import varifold as vf
        argmax_map = cur.slices[final.argmax_t]
        fam = vf.TestFunctionFamily.for_manifold(cur.target)
        report.varifold_distance = vf.varifold_distance(
            vf.varifold_of_map(argmax_map), reference_varifold, fam)
    if not report.stopped:
        report.stopped = "max-iters"
    return cur, report


def _roughness(u: DiscreteMap) -> float:
    """Largest second-difference norm relative to the local gradient scale."""
    worst = 0.0
    dom = u.domain
    for c in (0, 1):
        v = u.values[c]
        lap = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2]
               - 4.0 * v[1:-1, 1:-1])
        mag = np.linalg.norm(lap, axis=-1)
        act = dom.flat_weights[c][1:-1, 1:-1] > 0
        if np.any(act):
            worst = max(worst, float(np.max(mag[act])))
    return worst


# ---------------------------------------------------------------------------
# the almost-harmonic diagnostic

@dataclass
class AlmostHarmonicReport:
    max_gap: float
    witness: object
    energy_minus_area: float
    families_checked: int
    drop_gap_pairs: list = field(default_factory=list)


def almost_harmonic_check(u: DiscreteMap, eps0: float = 0.25,
                          budget: dr.SamplerBudget = None,
                          settings: dr.SolverSettings = None) -> AlmostHarmonicReport:
    """Worst replacement deviation on eighth-scaled sampled families with
    energy below eps0, plus the energy-minus-area defect.  The per-family
    (energy drop, gradient deviation) pairs trace the empirical relation
    between the two, for families where both are measurable."""
    budget = budget or dr.SamplerBudget()
    settings = settings or dr.SolverSettings()
    dom = u.domain
    worst = 0.0
    witness = None
    pairs = []
    for e_f, fam in dr.propose_families(u, eps0, budget):
        try:
            res = dr.harmonic_replace(u, fam, rho=0.125, s=settings)
        except EnergyTooLarge:
            continue
        gap = 0.0
        for b in fam.scaled(0.125):
            i0, i1, j0, j1 = dr._ball_box(dom, b)
            sub = dm.ball_mask(dom, b)[i0:i1, j0:j1]
            diff = (u.values[b.chart][i0:i1, j0:j1]
                    - res.map.values[b.chart][i0:i1, j0:j1])
            gap += dr.masked_grad_square(diff, sub)
        pairs.append((float(res.energy_drop), float(gap)))
        if gap > worst:
            worst, witness = float(gap), fam
    e_minus_a = dm.energy(u) - dm.area(u)
    return AlmostHarmonicReport(worst, witness, float(e_minus_a), len(pairs),
                                pairs)


# ---------------------------------------------------------------------------
# curve mode (the classical 1-dimensional tightening)

@dataclass
class CurveSweepout:
    slices: list  # (K, 3) vertex arrays on the unit sphere

    def copy(self):
        return CurveSweepout([v.copy() for v in self.slices])


def curve_latitude_sweepout(target=None, n_slices: int = 64,
                            n_vertices: int = 96) -> CurveSweepout:
    target = target or round_sphere(2, 1.0)
    radius = getattr(target, "radius", 1.0)
    ts = np.linspace(0.0, 1.0, n_slices + 1)
    ang = np.arange(n_vertices) * (2 * np.pi / n_vertices)
    slices = []
    for t in ts:
        st, ct = np.sin(np.pi * t), np.cos(np.pi * t)
        pts = np.stack([st * np.cos(ang), st * np.sin(ang),
                        np.full_like(ang, ct)], axis=-1)
        slices.append(radius * pts)
    return CurveSweepout(slices)


def curve_length(pts) -> float:
    p = np.asarray(pts, float)
    radius = np.linalg.norm(p[0])
    if radius < 1e-15:
        return 0.0
    q = p / radius
    nxt = np.roll(q, -1, axis=0)
    dots = np.clip(np.sum(q * nxt, axis=-1), -1.0, 1.0)
    return float(radius * np.sum(np.arccos(dots)))


def _geodesic_midpoints(a, b):
    m = a + b
    nm = np.linalg.norm(m, axis=-1, keepdims=True)
    radius = np.linalg.norm(a, axis=-1, keepdims=True)
    safe = nm > 1e-12
    return np.where(safe, radius * m / np.where(safe, nm, 1.0), a)


def birkhoff_step(pts):
    """Midpoint replacement on even arcs, then on odd arcs; length never grows."""
    p = np.asarray(pts, float)
    k = p.shape[0]
    assert k % 2 == 0
    q = p.copy()
    ev = np.arange(0, k, 2)
    q[ev + 1] = _geodesic_midpoints(p[ev], p[(ev + 2) % k])
    r = q.copy()
    r[ev] = _geodesic_midpoints(q[(ev - 1) % k], q[ev + 1])
    return r


def birkhoff_tighten(cs: CurveSweepout, max_iters: int = 200,
                     tol: float = 1e-10) -> dict:
    """Alternate midpoint-geodesic replacement; reports the max-length curve
    per iteration (non-increasing) until it stalls."""
    cur = cs.copy()
    history = [max(curve_length(v) for v in cur.slices)]
    for _ in range(max_iters):
        cur = CurveSweepout([birkhoff_step(v) for v in cur.slices])
        history.append(max(curve_length(v) for v in cur.slices))
        if abs(history[-2] - history[-1]) < tol * max(history[-1], 1.0):
            break
    return {"sweepout": cur, "max_length_history": np.array(history),
            "final_max_length": float(history[-1]),
            "monotone": bool(np.all(np.diff(history) <= 1e-12))}
