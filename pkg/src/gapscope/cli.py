"""Command-line experiment runner.

Every subcommand resolves its parameters from defaults, an optional JSON
config file (``--config``) and explicit flags, validates them against a JSON
schema, runs, and writes a CSV or JSON table.  One summary line per checked
bound is printed as ``PASS``/``FAIL``.  Exit status: 0 when every bound holds,
1 on a violated bound (the offending instance goes to ``counterexample.json``),
2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from fractions import Fraction

import jsonschema
import numpy as np

from . import __version__

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# --- schemas -----------------------------------------------------------------

_num = {"type": ["number", "string"]}
_int = {"type": "integer"}
_str = {"type": "string"}
_bool = {"type": "boolean"}


def _schema(props: dict) -> dict:
    base = {"seed": _int, "threads": {"type": "integer", "minimum": 1},
            "format": {"enum": ["csv", "json"]}}
    base.update(props)
    return {"type": "object", "properties": base, "additionalProperties": False}


SCHEMAS = {
    "three-gap": _schema({
        "p": {"type": ["string", "number", "null"]}, "n": {"type": ["integer", "null"], "minimum": 1},
        "sweep": {"type": ["string", "null"]}, "count": {"type": "integer", "minimum": 1},
        "metric": {"enum": ["arc", "chord"]},
    }),
    "torus-gaps": _schema({
        "primes": {"type": ["string", "null"]}, "s": _str, "emit_orbit": {"type": ["string", "null"]},
        "all_upto": {"type": ["integer", "null"], "minimum": 3},
        "method": {"enum": ["auto", "fast", "exact"]},
    }),
    "klein": _schema({
        "slope": _str, "length": _num, "start": _str, "w": _num, "h": _num,
    }),
    "orbit-nnd": _schema({
        "space": _str, "step": {"type": ["number", "null"]}, "n": {"type": ["integer", "null"], "minimum": 1},
        "sweep": {"type": ["string", "null"]}, "count": {"type": "integer", "minimum": 1},
        "check_identities": _bool,
    }),
    "packing": _schema({
        "space": _str, "r": {"type": "number", "exclusiveMinimum": 0},
        "trials": {"type": "integer", "minimum": 1},
    }),
    "geo-scan": _schema({
        "surface": _str, "configs": {"type": "integer", "minimum": 1},
        "T": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "n": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "h": {"type": "number", "exclusiveMinimum": 0},
    }),
    "derivative-check": _schema({
        "surface": _str, "slope": _str, "length": {"type": "number", "exclusiveMinimum": 0},
        "h": {"type": "number", "exclusiveMinimum": 0}, "x0": _str, "v0": _str,
        "tolerance": {"type": ["number", "null"]}, "limit": {"type": "integer", "minimum": 1},
    }),
    "conjugate": _schema({
        "surface": _str, "x0": _str, "v0": _str, "length": {"type": "number", "exclusiveMinimum": 0},
        "h": {"type": "number", "exclusiveMinimum": 0},
    }),
}

DEFAULTS = {
    "three-gap": {"p": None, "n": None, "sweep": None, "count": 10_000, "metric": "arc"},
    "torus-gaps": {"primes": None, "s": "auto", "emit_orbit": None, "all_upto": None, "method": "auto"},
    "klein": {"slope": "3/4", "length": "10", "start": "1/7,1/3", "w": "1", "h": "1"},
    "orbit-nnd": {"space": "s2", "step": None, "n": None, "sweep": None, "count": 1,
                  "check_identities": True},
    "packing": {"space": "e2", "r": 1.0, "trials": 100},
    "geo-scan": {"surface": "sphere", "configs": 5, "T": [0.7], "n": [10, 100, 500], "h": 1e-3},
    "derivative-check": {"surface": "klein", "slope": "3/4", "length": 5.0, "h": 1e-3,
                         "x0": "1,0,0", "v0": "auto", "tolerance": None, "limit": 5},
    "conjugate": {"surface": "sphere", "x0": "1,0,0", "v0": "0,0.6,0.8", "length": 10.0, "h": 1e-3},
}


# --- output ------------------------------------------------------------------

class Report:
    def __init__(self):
        self.checks: list[tuple[bool, str]] = []
        self.counterexamples: list[dict] = []

    def check(self, ok: bool, label: str, instance: dict | None = None):
        self.checks.append((bool(ok), label))
        if not ok and instance is not None:
            self.counterexamples.append({"check": label, "instance": instance})

    @property
    def ok(self) -> bool:
        return all(ok for ok, _ in self.checks)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def render_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    buf.write(f"# gapscope {__version__} generated {datetime.now(timezone.utc).isoformat()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def render_json(rows, columns, extra=None) -> str:
    body = {"columns": columns, "rows": [{c: _jsonable(r.get(c)) for c in columns} for r in rows]}
    if extra:
        body.update(_jsonable(extra))
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def _pmap(fn, items, threads):
    """Order-preserving map, in worker processes when ``threads > 1``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# --- helpers -------------------------------------------------------------------

def _fracs(text: str) -> list:
    return [Fraction(t.strip()) for t in str(text).split(",") if t.strip()]


def _floats(text: str) -> np.ndarray:
    return np.array([float(Fraction(t.strip())) for t in str(text).split(",") if t.strip()])


# --- three-gap -------------------------------------------------------------------

def _three_gap_row(a, b, n, gaps, nnd):
    return {
        "p": f"{a}/{b}", "n": n, "gap_count": len(gaps), "nnd_count": len(nnd),
        "gaps": [str(Fraction(int(g), b)) for g in gaps],
        "nnd_values": [str(Fraction(int(v), b)) for v in nnd],
    }


def _three_gap_cell(args):
    a, b, n = args
    from .circle import integer_orbit_counts

    g, v = integer_orbit_counts(a, b, n)
    return _three_gap_row(a, b, n, g, v)


def run_three_gap(cfg, rep: Report):
    from .circle import (circular_gap_spectrum, geometric_nnd_count, rotation_orbit,
                         three_gap_sweep)

    cols = ["p", "n", "gap_count", "nnd_count", "gaps", "nnd_values"]
    rows = []
    if cfg["sweep"]:
        try:
            denom_max, n_max = (int(x) for x in cfg["sweep"].split(","))
        except ValueError as exc:
            raise UsageError("--sweep expects denom_max,n_max") from exc
        if denom_max < 2 or n_max < 1:
            raise UsageError("--sweep needs denom_max >= 2 and n_max >= 1")
        cells = [(a, b, n) for a, b, n, _, _ in three_gap_sweep(cfg["count"], denom_max, n_max, cfg["seed"])]
        rows = _pmap(_three_gap_cell, cells, cfg["threads"])
    else:
        if cfg["p"] is None or cfg["n"] is None:
            raise UsageError("three-gap needs --p and --n, or --sweep")
        p = cfg["p"]
        try:
            p = Fraction(p) if isinstance(p, str) and "." not in p else float(p)
        except ValueError as exc:
            raise UsageError(f"bad rotation {p!r}") from exc
        o = rotation_orbit(p, cfg["n"])
        gaps = circular_gap_spectrum(o)
        spec = geometric_nnd_count(o, arc=cfg["metric"] == "arc")
        rows = [{"p": str(p), "n": cfg["n"], "gap_count": len(gaps), "nnd_count": spec.count,
                 "gaps": [str(g) for g in gaps], "nnd_values": [str(c.key) for c in spec.classes]}]
    worst_gap = max(r["gap_count"] for r in rows)
    worst_nnd = max(r["nnd_count"] for r in rows)
    bad = next((r for r in rows if r["gap_count"] > 3 or r["nnd_count"] > 3), None)
    rep.check(worst_gap <= 3, f"circular gaps <= 3 (max {worst_gap} over {len(rows)} orbits)", bad)
    rep.check(worst_nnd <= 3, f"|NND| <= 3 (max {worst_nnd} over {len(rows)} orbits)", bad)
    return rows, cols, None


# --- torus-gaps ------------------------------------------------------------------

def _torus_cell(args):
    primes, s, method = args
    from .errors import CertificateFailure
    from .flat import many_gaps_construction

    try:
        c = many_gaps_construction(primes, s, method)
        return {"primes": list(primes), "N": c.N, "k": c.k, "nnd_count": c.nnd_count,
                "a": list(c.a), "delta": list(c.delta), "passed": c.passed, "method": c.method}
    except CertificateFailure as exc:
        return {"primes": list(primes), "N": math.prod(primes), "k": len(primes), "nnd_count": -1,
                "a": [], "delta": [], "passed": False, "method": method, "error": str(exc)}


def run_torus_gaps(cfg, rep: Report):
    from .errors import CertificateFailure, DomainError
    from .flat import many_gaps_construction, prime_tuples, translation_orbit, TorusLattice

    s = cfg["s"]
    if s != "auto":
        try:
            s = Fraction(s)
        except ValueError as exc:
            raise UsageError(f"bad s {s!r}") from exc
    if cfg["all_upto"]:
        cols = ["primes", "N", "k", "nnd_count", "a", "delta", "passed", "method"]
        cells = [(t, s, cfg["method"]) for t in prime_tuples(cfg["all_upto"])]
        rows = _pmap(_torus_cell, cells, cfg["threads"])
        bad = next((r for r in rows if not r["passed"]), None)
        rep.check(bad is None, f"certificate passes for all {len(rows)} tuples with N <= {cfg['all_upto']}", bad)
        return rows, cols, None
    if not cfg["primes"]:
        raise UsageError("torus-gaps needs --primes or --all-upto")
    try:
        primes = [int(p) for p in cfg["primes"].split(",")]
    except ValueError as exc:
        raise UsageError("--primes expects a comma-separated list") from exc
    cols = ["j", "prime", "inverse", "a", "delta", "sqdist", "formula", "nearest_is_x0", "formula_ok"]
    try:
        cert = many_gaps_construction(primes, s, cfg["method"])
    except CertificateFailure as exc:
        rep.check(False, f"certificate check {exc.check} (j={exc.j})",
                  {"primes": primes, "s": str(s), "error": str(exc)})
        return [], cols, None
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    rows = [{"j": j, "prime": cert.primes[j], "inverse": cert.inverses[j], "a": cert.a[j],
             "delta": cert.delta[j], "sqdist": str(cert.sqdists[j]), "formula": str(cert.formula[j]),
             "nearest_is_x0": cert.nearest_ok[j], "formula_ok": cert.formula_ok[j]}
            for j in range(cert.k)]
    rep.check(cert.passed, f"certificate for primes {list(cert.primes)}: a = {list(cert.a)}, "
              f"delta = {list(cert.delta)}, |NND| = {cert.nnd_count} >= k = {cert.k}", cert.to_dict())
    bound = 3 ** cert.k + 1
    rep.check(cert.nnd_count <= bound, f"|NND| = {cert.nnd_count} <= 3^k + 1 = {bound}", cert.to_dict())
    extra = {"certificate": cert.to_dict()}
    if cfg["emit_orbit"]:
        L = TorusLattice(sides=cert.primes)
        pts = translation_orbit(L, cert.v, (0,) * cert.k, cert.N - 1)
        extra["orbit"] = [[str(c) for c in p] for p in pts]
    return rows, cols, extra


# --- klein -------------------------------------------------------------------------

def run_klein(cfg, rep: Report):
    from .flat import KleinQuotient, klein_geodesic_intersections

    K = KleinQuotient(Fraction(str(cfg["w"])), Fraction(str(cfg["h"])))
    start = _fracs(cfg["start"])
    if len(start) != 2:
        raise UsageError("--start expects x,y")
    crossings, overlaps, mult = klein_geodesic_intersections(K, cfg["slope"], Fraction(str(cfg["length"])), start)
    cols = ["s", "t", "x", "y", "cos_angle", "angle", "multiplicity"]
    rows = [{"s": str(c.s), "t": str(c.t), "x": str(c.location[0]), "y": str(c.location[1]),
             "cos_angle": str(c.cos_angle), "angle": c.angle(), "multiplicity": mult[c.location]}
            for c in crossings]
    rep.check(True, f"{len(crossings)} transverse self-intersections, {len(overlaps)} overlaps")
    return rows, cols, {"overlaps": [list(o) for o in overlaps]}


# --- orbit-nnd -----------------------------------------------------------------------

def _random_unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _orbit_cell(args):
    space_desc, T, n, seed, cid, check_ids = args
    from .spaces import (FlatTorusSpace, Hyperbolic, ProductSpace, TorusTranslation, Euclidean,
                         orbit_nnd_ceiling, isometry_orbit, isometry_orbit_spectrum,
                         nonnegatively_curved, parse_space, product_transvection, transvection)

    S = parse_space(space_desc)
    rng = np.random.default_rng([seed, cid])

    def point_dir(F):
        if isinstance(F, Hyperbolic):
            p = F.origin()
            u = np.zeros(F.k + 1)
            u[1:] = _random_unit(rng, F.k)
            return p, u
        if isinstance(F, Euclidean):
            return rng.standard_normal(F.k), _random_unit(rng, F.k)
        p = _random_unit(rng, F.k + 1)
        u = rng.standard_normal(F.k + 1)
        u -= (u @ p) * p
        return p, u / np.linalg.norm(u)

    if isinstance(S, FlatTorusSpace):
        den = 997
        q = [Fraction(int(m), den) for m in rng.integers(-den, den + 1, size=S.k)]
        Tq = Fraction(T).limit_denominator(10 ** 6)
        I = TorusTranslation(S, tuple(Tq * c for c in q))
        p = tuple(Fraction(int(m), den) for m in rng.integers(0, den, size=S.k))
    elif isinstance(S, ProductSpace):
        ps, us = zip(*(point_dir(F) for F in S.factors))
        ang = rng.uniform(0, math.pi / 2)
        speeds = (math.cos(ang), math.sin(ang)) if len(S.factors) == 2 else tuple(
            _random_unit(rng, len(S.factors)))
        I = product_transvection(S, ps, us, speeds, T)
        p = tuple(ps)
    else:
        p, u = point_dir(S)
        I = transvection(S, p, u, T)
    spec = isometry_orbit_spectrum(S, I, p, n)
    row = {"config_id": cid, "T": T, "n": n, "nnd_count": spec.count,
           "max_class": max(spec.values()), "min_class": min(spec.values())}
    row["bound"] = orbit_nnd_ceiling(S) if nonnegatively_curved(S) else ""
    if check_ids and len(spec.keys) == n + 1:
        pts = isometry_orbit(I, p, n)
        if isinstance(S, FlatTorusSpace) and S.lattice.exact:
            from .nnd import nnd_spectrum

            v = [math.sqrt(k) for k in nnd_spectrum(pts, S.oracle()).keys]
        else:
            D = S.pairwise(pts)
            np.fill_diagonal(D, np.inf)
            v = D.min(axis=1).tolist()
        sym = max(abs(v[i] - v[n - i]) for i in range(n + 1))
        mono = min((v[i + 1] - v[i] for i in range(n // 2)), default=0.0)
        row["symmetry_defect"] = sym
        row["monotone_defect"] = max(0.0, -mono)
    return row


def run_orbit_nnd(cfg, rep: Report):
    from .spaces import parse_space

    try:
        parse_space(cfg["space"])
    except Exception as exc:
        raise UsageError(str(exc)) from exc
    if cfg["sweep"]:
        with open(cfg["sweep"]) as fh:
            items = json.load(fh)
        if not isinstance(items, list):
            raise UsageError("sweep file must hold a list of {step, n} objects")
        cells = []
        for cid, it in enumerate(items):
            try:
                jsonschema.validate(it, {"type": "object", "properties": {"step": {"type": "number"},
                                    "n": {"type": "integer", "minimum": 1}},
                                    "required": ["step", "n"], "additionalProperties": False})
            except jsonschema.ValidationError as exc:
                raise UsageError(f"sweep entry {cid}: {exc.message}") from exc
            cells.append((cfg["space"], float(it["step"]), int(it["n"]), cfg["seed"], cid,
                          cfg["check_identities"]))
    else:
        if cfg["step"] is None or cfg["n"] is None:
            raise UsageError("orbit-nnd needs --step and --n, or --sweep")
        cells = [(cfg["space"], float(cfg["step"]), int(cfg["n"]), cfg["seed"], cid, cfg["check_identities"])
                 for cid in range(cfg["count"])]
    rows = _pmap(_orbit_cell, cells, cfg["threads"])
    cols = ["config_id", "T", "n", "nnd_count", "max_class", "min_class", "bound",
            "symmetry_defect", "monotone_defect"]
    bound = rows[0]["bound"]
    if bound != "":
        bad = next((r for r in rows if r["nnd_count"] > bound), None)
        rep.check(bad is None, f"|NND| <= 3^k + 1 = {bound} (max {max(r['nnd_count'] for r in rows)})", bad)
    if cfg["check_identities"]:
        sym = max(r.get("symmetry_defect", 0.0) for r in rows)
        mono = max(r.get("monotone_defect", 0.0) for r in rows)
        bad = next((r for r in rows if r.get("symmetry_defect", 0) > 1e-12), None)
        rep.check(sym <= 1e-12, f"nnd(I^i p) = nnd(I^(n-i) p) within 1e-12 (max defect {sym:.3g})", bad)
        bad = next((r for r in rows if r.get("monotone_defect", 0) > 1e-12), None)
        rep.check(mono <= 1e-12, f"nnd nondecreasing up to n/2 (max defect {mono:.3g})", bad)
    return rows, cols, None


# --- packing -------------------------------------------------------------------------

def run_packing(cfg, rep: Report):
    from .packing import euclidean_packing_bound, greedy_packing
    from .spaces import Euclidean, Hyperbolic, ProjectiveSpace, Sphere, parse_space

    try:
        S = parse_space(cfg["space"])
    except Exception as exc:
        raise UsageError(str(exc)) from exc
    if not isinstance(S, (Euclidean, Sphere, Hyperbolic, ProjectiveSpace)):
        raise UsageError("packing supports e<k>, s<k>, rp<k> and h<k>:<kappa>")
    res = greedy_packing(S, None, float(cfg["r"]), trials=cfg["trials"], seed=cfg["seed"])
    bound = euclidean_packing_bound(S.k) if not isinstance(S, Hyperbolic) else ""
    row = {"space": cfg["space"], "r": float(cfg["r"]), "count": res.count, "bound": bound,
           "verified": res.certificate.ok, "trials": cfg["trials"], "seed": cfg["seed"]}
    rep.check(res.certificate.ok, f"packing certificate verified ({res.count} points)", res.to_dict())
    if bound != "":
        rep.check(res.count <= bound, f"count {res.count} <= 3^k = {bound}", res.to_dict())
    return [row], ["space", "r", "count", "bound", "verified", "trials", "seed"], {"certificate": res.to_dict()}


# --- geodesic lab ------------------------------------------------------------------------

def _surface(desc):
    from .geodesic.surfaces import parse_surface

    try:
        return parse_surface(desc)
    except Exception as exc:
        raise UsageError(str(exc)) from exc


def _geo_cell(args):
    desc, cfgd, Ts, ns, h = args
    from .geodesic.scan import GeodesicConfig, bgc_scan
    from .geodesic.surfaces import parse_surface

    S = parse_surface(desc)
    rows, _ = bgc_scan(S, [GeodesicConfig(*cfgd)], Ts, ns, h)
    return rows


def run_geo_scan(cfg, rep: Report):
    from .geodesic.scan import random_configs
    from .geodesic.surfaces import SphereSurface

    S = _surface(cfg["surface"])
    configs = random_configs(S, cfg["configs"], cfg["seed"])
    cells = [(cfg["surface"], (c.x0, c.v0, c.config_id), cfg["T"], cfg["n"], cfg["h"]) for c in configs]
    rows = [r for chunk in _pmap(_geo_cell, cells, cfg["threads"]) for r in chunk]
    cols = ["config_id", "T", "n", "nnd_count", "refined_pairs", "warnings"]
    growth = {}
    for r in rows:
        growth[r["n"]] = max(growth.get(r["n"], 0), r["nnd_count"])
    if isinstance(S, SphereSurface):
        bad = next((r for r in rows if r["nnd_count"] > 3), None)
        rep.check(bad is None, f"round sphere |NND| <= 3 (max {max(growth.values())})", bad)
    else:
        rep.check(True, "growth of max |NND| in n: " + ", ".join(f"{n}:{g}" for n, g in sorted(growth.items())))
    warn = sum(r["warnings"] for r in rows)
    rep.check(True, f"{warn} shooting fallbacks to chordal distance")
    return rows, cols, {"growth": {str(k): v for k, v in sorted(growth.items())}}


def _start_on(S, x0, v0):
    x = np.array(S.project(*_floats(x0), iters=50))
    e1, e2 = S.tangent_basis(x)
    if v0 == "auto":
        v = e1 + 0.7 * e2
    else:
        v = _floats(v0)
        g = np.array(S.grad(*x))
        v = v - (v @ g) / (g @ g) * g
    return x, v / np.linalg.norm(v)


def run_derivative_check(cfg, rep: Report):
    from .geodesic.distance import intrinsic_distance
    from .geodesic.integrate import integrate_geodesic
    from .geodesic.intersections import (count_self_intersections, derivative_triple_analytic,
                                         derivative_triple_fd)

    cols = ["s", "t", "alpha", "D1", "D2", "D3", "fd1", "fd2", "fd3", "max_rel_err"]
    rows = []
    if cfg["surface"] == "klein":
        from .flat import KleinQuotient, _parse_slope, klein_geodesic_intersections

        K = KleinQuotient(1, 1)
        P, Q = _parse_slope(cfg["slope"])
        n2 = P * P + Q * Q
        r = math.isqrt(n2)
        if r * r != n2:
            raise UsageError("klein derivative check needs a Pythagorean slope (e.g. 3/4)")
        start = (Fraction(1, 7), Fraction(1, 3))
        u = (Fraction(Q, r), Fraction(P, r))
        crossings, _, _ = klein_geodesic_intersections(K, (P, Q), Fraction(str(cfg["length"])), start)

        def gamma(t):
            return (start[0] + t * u[0], start[1] + t * u[1])

        tol = cfg["tolerance"] if cfg["tolerance"] is not None else 1e-6
        xis = (Fraction(1, 100), Fraction(1, 200), Fraction(1, 400))
        for c in crossings[: cfg["limit"]]:
            s, t = c.s * r, c.t * r
            fd = derivative_triple_fd(gamma, s, t, xis, sqdist=K.sqdist, crossing_tol=0)
            an = derivative_triple_analytic(float(s), float(t), c.angle())
            rows.append(_deriv_row(float(s), float(t), c.angle(), an, [float(x) for x in fd]))
    else:
        S = _surface(cfg["surface"])
        x, v = _start_on(S, cfg["x0"], cfg["v0"])
        traj = integrate_geodesic(S, x, v, float(cfg["length"]), float(cfg["h"]))
        rec = count_self_intersections(traj).records
        tol = cfg["tolerance"] if cfg["tolerance"] is not None else 1e-3
        for c in rec[: cfg["limit"]]:
            fd = derivative_triple_fd(traj.point_at, c.s, c.t,
                                      dist=lambda p, q: intrinsic_distance(S, p, q).value,
                                      crossing_tol=1e-8)
            an = derivative_triple_analytic(c.s, c.t, c.angle)
            rows.append(_deriv_row(c.s, c.t, c.angle, an, fd))
    worst = max((r["max_rel_err"] for r in rows), default=0.0)
    bad = next((r for r in rows if r["max_rel_err"] > tol), None)
    rep.check(bool(rows), f"{len(rows)} certified crossings checked")
    rep.check(worst <= tol, f"finite differences match analytic triple within {tol:g} (max {worst:.3g})", bad)
    return rows, cols, None


def _deriv_row(s, t, alpha, an, fd):
    err = max(abs(a - b) / max(abs(a), 1e-300) for a, b in zip(an, fd))
    return {"s": s, "t": t, "alpha": alpha, "D1": an[0], "D2": an[1], "D3": an[2],
            "fd1": fd[0], "fd2": fd[1], "fd3": fd[2], "max_rel_err": err}


def run_conjugate(cfg, rep: Report):
    from .geodesic.integrate import integrate_geodesic
    from .geodesic.jacobi import conjugate_points
    from .geodesic.surfaces import PlaneSurface, SphereSurface

    S = _surface(cfg["surface"])
    x, v = _start_on(S, cfg["x0"], cfg["v0"])
    traj = integrate_geodesic(S, x, v, float(cfg["length"]), float(cfg["h"]))
    times = conjugate_points(S, traj)
    rows = [{"index": i, "time": t} for i, t in enumerate(times)]
    if isinstance(S, SphereSurface) and cfg["length"] > math.pi * S.radius:
        ok = bool(times) and abs(times[0] - math.pi * S.radius) <= 1e-6
        rep.check(ok, f"first conjugate time {times[0] if times else None!r} = pi R within 1e-6",
                  {"times": times})
    elif isinstance(S, PlaneSurface):
        rep.check(not times, "flat surface has no conjugate points", {"times": times})
    else:
        rep.check(True, f"{len(times)} conjugate points up to length {cfg['length']}")
    return rows, ["index", "time"], None


RUNNERS = {
    "three-gap": run_three_gap,
    "torus-gaps": run_torus_gaps,
    "klein": run_klein,
    "orbit-nnd": run_orbit_nnd,
    "packing": run_packing,
    "geo-scan": run_geo_scan,
    "derivative-check": run_derivative_check,
    "conjugate": run_conjugate,
}


# --- argument parsing -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    g.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    g.add_argument("--out", default=None, help="output directory (default: stdout)")
    g.add_argument("--format", choices=["csv", "json"], default=argparse.SUPPRESS)
    g.add_argument("--config", default=None, help="JSON file with parameters")

    p = argparse.ArgumentParser(prog="gapscope", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    a = sub.add_parser("three-gap", parents=[common], help="circle rotation gaps and NND")
    a.add_argument("--p", default=S)
    a.add_argument("--n", type=int, default=S)
    a.add_argument("--sweep", default=S, metavar="DENOM_MAX,N_MAX")
    a.add_argument("--count", type=int, default=S)
    a.add_argument("--metric", choices=["arc", "chord"], default=S)

    a = sub.add_parser("torus-gaps", parents=[common], help="prime-box torus orbit certificate")
    a.add_argument("--primes", default=S)
    a.add_argument("--s", default=S)
    a.add_argument("--emit-orbit", dest="emit_orbit", choices=["csv"], default=S)
    a.add_argument("--all-upto", dest="all_upto", type=int, default=S)
    a.add_argument("--method", choices=["auto", "fast", "exact"], default=S)

    a = sub.add_parser("klein", parents=[common], help="exact Klein bottle self-intersections")
    a.add_argument("--slope", default=S)
    a.add_argument("--length", default=S)
    a.add_argument("--start", default=S)
    a.add_argument("--w", default=S)
    a.add_argument("--h", default=S)

    a = sub.add_parser("orbit-nnd", parents=[common], help="isometry orbit NND on model spaces")
    a.add_argument("--space", default=S)
    a.add_argument("--step", type=float, default=S)
    a.add_argument("--n", type=int, default=S)
    a.add_argument("--sweep", default=S, metavar="FILE.json")
    a.add_argument("--count", type=int, default=S)

    a = sub.add_parser("packing", parents=[common], help="greedy certified packings")
    a.add_argument("--space", default=S)
    a.add_argument("--r", type=float, default=S)
    a.add_argument("--trials", type=int, default=S)

    a = sub.add_parser("geo-scan", parents=[common], help="NND of geodesic samples on a surface")
    a.add_argument("--surface", default=S)
    a.add_argument("--configs", type=int, default=S)
    a.add_argument("--T", type=float, nargs="+", default=S)
    a.add_argument("--n", type=int, nargs="+", default=S)
    a.add_argument("--h", type=float, default=S)

    a = sub.add_parser("derivative-check", parents=[common], help="second-derivative triple at crossings")
    a.add_argument("--surface", default=S, help="klein, or a surface descriptor")
    a.add_argument("--slope", default=S)
    a.add_argument("--length", type=float, default=S)
    a.add_argument("--h", type=float, default=S)
    a.add_argument("--x0", default=S)
    a.add_argument("--v0", default=S)
    a.add_argument("--tolerance", type=float, default=S)
    a.add_argument("--limit", type=int, default=S)

    a = sub.add_parser("conjugate", parents=[common], help="conjugate points along a geodesic")
    a.add_argument("--surface", default=S)
    a.add_argument("--x0", default=S)
    a.add_argument("--v0", default=S)
    a.add_argument("--length", type=float, default=S)
    a.add_argument("--h", type=float, default=S)
    return p


def resolve_config(command: str, ns: argparse.Namespace) -> dict:
    cfg = {"seed": 0, "threads": 1, "format": "csv"}
    cfg.update(DEFAULTS[command])
    if ns.config:
        try:
            with open(ns.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        _validate(command, loaded)
        cfg.update(loaded)
    skip = {"command", "config", "out"}
    cfg.update({k: v for k, v in vars(ns).items() if k not in skip})
    _validate(command, cfg)
    return cfg


def _validate(command, cfg):
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "config"
        raise UsageError(f"{where}: {exc.message}") from exc


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    rep = Report()
    try:
        cfg = resolve_config(ns.command, ns)
        rows, cols, extra = RUNNERS[ns.command](cfg, rep)
    except UsageError as exc:
        print(f"gapscope {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if cfg["format"] == "json":
        body, name = render_json(rows, cols, extra), f"{ns.command}.json"
    else:
        body, name = render_csv(rows, cols), f"{ns.command}.csv"
    summary = [f"{'PASS' if ok else 'FAIL'} {label}" for ok, label in rep.checks]
    if ns.out:
        os.makedirs(ns.out, exist_ok=True)
        with open(os.path.join(ns.out, name), "w") as fh:
            fh.write(body)
        with open(os.path.join(ns.out, "config.json"), "w") as fh:
            json.dump({"command": ns.command, **_jsonable(cfg)}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if extra and cfg["format"] == "csv":
            with open(os.path.join(ns.out, f"{ns.command}-extra.json"), "w") as fh:
                json.dump(_jsonable(extra), fh, indent=2, sort_keys=True)
                fh.write("\n")
        if extra and "orbit" in extra:
            with open(os.path.join(ns.out, "orbit.csv"), "w") as fh:
                fh.write("index," + ",".join(f"x{i}" for i in range(len(extra["orbit"][0]))) + "\n")
                for i, p in enumerate(extra["orbit"]):
                    fh.write(f"{i}," + ",".join(p) + "\n")
        if rep.counterexamples:
            with open(os.path.join(ns.out, "counterexample.json"), "w") as fh:
                json.dump(_jsonable(rep.counterexamples), fh, indent=2, sort_keys=True)
                fh.write("\n")
        print("\n".join(summary))
    else:
        sys.stdout.write(body)
        print("\n".join(summary), file=sys.stderr)
        if rep.counterexamples:
            print(json.dumps(_jsonable(rep.counterexamples), sort_keys=True), file=sys.stderr)
    return EXIT_OK if rep.ok else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
