"""Self-describing containers for maps and sweepouts, plus CSV exports.

A map record is one JSON header line followed by the raw little-endian
float64 node blocks, one per chart, row major.  A sweepout container is a
manifest line followed by the slice records in order.  Formats are
documented in docs/formats.md.
"""
from __future__ import annotations

import json

import numpy as np

from . import dmap as dm
from . import manifold as mf
from .domains import CylinderDomain, DiskDomain, SphereDomain

MAP_FORMAT = "widthlab-map/1"
SWEEPOUT_FORMAT = "widthlab-sweepout/1"


def _domain_from_descriptor(desc: dict):
    kind = desc["kind"]
    if kind == "sphere2":
        return SphereDomain(n=int(desc["n"]), half_width=float(desc["half_width"]),
                            band=float(desc["band"]))
    if kind == "disk":
        return DiskDomain(radius=float(desc["radius"]), n=int(desc["n"]))
    if kind == "cylinder":
        return CylinderDomain(float(desc["t0"]), float(desc["t1"]),
                              int(desc["n_t"]), int(desc["n_theta"]))
    raise ValueError(f"unknown domain kind {kind!r}")


def write_map(fh, u: dm.DiscreteMap):
    header = {
        "format": MAP_FORMAT,
        "domain": u.domain.descriptor(),
        "target": u.target.descriptor(),
        "blocks": [list(v.shape) for v in u.values],
    }
    fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
    for v in u.values:
        fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def read_map(fh) -> dm.DiscreteMap:
    header = json.loads(fh.readline().decode())
    if header.get("format") != MAP_FORMAT:
        raise ValueError("not a map record")
    dom = _domain_from_descriptor(header["domain"])
    target = mf.from_descriptor(header["target"])
    vals = []
    for shape in header["blocks"]:
        count = int(np.prod(shape))
        buf = fh.read(count * 8)
        vals.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
    return dm.DiscreteMap(dom, target, vals)


def save_map(path, u: dm.DiscreteMap):
    with open(path, "wb") as fh:
        write_map(fh, u)


def load_map(path) -> dm.DiscreteMap:
    with open(path, "rb") as fh:
        return read_map(fh)


def save_sweepout(path, s):
    with open(path, "wb") as fh:
        manifest = {"format": SWEEPOUT_FORMAT, "n_slices": s.n_slices,
                    "degree": s.degree, "target": s.target.descriptor()}
        fh.write((json.dumps(manifest, sort_keys=True) + "\n").encode())
        for u in s.slices:
            write_map(fh, u)


def load_sweepout(path):
    from .sweepout import Sweepout
    with open(path, "rb") as fh:
        manifest = json.loads(fh.readline().decode())
        if manifest.get("format") != SWEEPOUT_FORMAT:
            raise ValueError("not a sweepout container")
        slices = [read_map(fh) for _ in range(int(manifest["n_slices"]))]
    return Sweepout(slices, slices[0].target, degree=int(manifest["degree"]))


# ---------------------------------------------------------------------------
# CSV exports (deterministic formatting)

def fmt(x) -> str:
    return repr(float(x))


def energy_density_csv(path, u: dm.DiscreteMap):
    dom = u.domain
    with open(path, "w") as fh:
        fh.write("chart,i,j,x,y,density\n")
        for c in range(u.n_charts):
            dens = dm.energy_density(u, c)
            for i in range(dens.shape[0]):
                for j in range(dens.shape[1]):
                    fh.write(f"{c},{i},{j},{fmt(dom.X[i, j])},{fmt(dom.Y[i, j])},"
                             f"{fmt(dens[i, j])}\n")


def varifold_csv(path, v):
    n = v.ambient_dim
    cols = [f"p{k}" for k in range(n)] + \
           [f"P{a}{b}" for a in range(n) for b in range(n)] + ["weight"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for p, pl, w in zip(v.points, v.planes, v.weights):
            row = [fmt(x) for x in p] + [fmt(x) for x in pl.ravel()] + [fmt(w)]
            fh.write(",".join(row) + "\n")


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt(x)
    return str(x)


def table_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(x) for x in row) + "\n")
