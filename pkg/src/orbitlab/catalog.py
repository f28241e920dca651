"""Enumeration of periodic points on the Julia set and the orbit catalog.

The catalog is the central dataset: every primitive repelling orbit up to a
period cap, with multipliers kept in log-polar form.  Enumeration is by
inverse-branch pullback for the quadratic family (one contraction per binary
symbol sequence) with a Newton-from-seeds path for general polynomials and
as a completeness rescue.  Every level is reconciled against the algebraic
root count d**n before it is accepted.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .maps import (
    HyperbolicityReport,
    LogPolar,
    RationalMap,
    classify_hyperbolicity,
    iterate_with_derivative,
    parse_map_spec,
    wrap_angle_array,
)

SCHEMA_VERSION = 1

# Fixed off-axis start for inverse iteration; generic with respect to the
# square-root branch cuts of the maps in scope.
_PULLBACK_START = 0.53 + 0.41j


class IncompleteEnumerationError(RuntimeError):
    """Found fewer period-n solutions than the degree count requires."""

    def __init__(self, n, expected, found, detail=""):
        msg = f"incomplete enumeration at period {n}: expected {expected}, found {found}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.n = n
        self.expected = expected
        self.found = found


class ToleranceCollisionError(RuntimeError):
    """Two distinct orbits approached within the dedup tolerance band."""


class CatalogFormatError(ValueError):
    """Persisted catalog could not be decoded."""


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances of the enumeration pipeline.

    dedup is absolute (maps in scope are normalized to O(1) Julia set
    diameter).  The Newton residual is a floor: at long periods the
    attainable |h^n(z)-z| is limited by |(h^n)'| * eps, and convergence is
    judged on the Newton step instead.
    """

    dedup: float = 1e-9
    newton_residual: float = 1e-12
    cycle: float = 1e-9

    def as_dict(self):
        return {"dedup": self.dedup, "newton_residual": self.newton_residual,
                "cycle": self.cycle}


@dataclass(frozen=True)
class PeriodicPoint:
    z: complex
    period: int
    primitive_period: int


@dataclass(frozen=True)
class PrimitiveOrbit:
    """A primitive cycle with its multiplier (log-polar)."""

    period: int
    points: tuple[complex, ...]
    multiplier: LogPolar

    @property
    def z0(self) -> complex:
        return self.points[0]


@dataclass(frozen=True)
class LevelReport:
    """Completeness accounting for one period level."""

    n: int
    expected_count: int        # all complex solutions of h^n(z) = z, i.e. d**n
    found_count: int           # distinct Julia-set solutions found
    attracting_excluded: int   # finite attracting periodic points, period | n

    @property
    def reconciled(self) -> bool:
        return self.found_count + self.attracting_excluded == self.expected_count


def divisors(n: int) -> list[int]:
    ds = [d for d in range(1, n + 1) if n % d == 0]
    return ds


def mobius(n: int) -> int:
    if n == 1:
        return 1
    m, k = n, 0
    p = 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            k += 1
        p += 1
    if m > 1:
        k += 1
    return -1 if k % 2 else 1


# ---------------------------------------------------------------------------
# low-level enumeration machinery
# ---------------------------------------------------------------------------

def _forward_orbit_arrays(m: RationalMap, z: np.ndarray, n: int):
    """h^n(z) and (h^n)'(z) for an array of points, with overflow masked."""
    w = z.astype(complex).copy()
    dw = np.ones_like(w)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            dw = dw * m._deriv_raw(w)
            w = m._eval_raw(w)
    ok = np.isfinite(w) & np.isfinite(dw)
    return w, dw, ok


def _newton_polish(m: RationalMap, n: int, z: np.ndarray, tol: Tolerances,
                   max_iter: int = 30):
    """Vectorized Newton on G(z) = h^n(z) - z.

    Returns (roots, derivative (h^n)', ok mask).  Non-convergent rows are
    masked out, never fatal.
    """
    z = z.astype(complex).copy()
    alive = np.ones(z.shape, dtype=bool)
    for _ in range(max_iter):
        w, dw, ok = _forward_orbit_arrays(m, z, n)
        alive &= ok
        g = w - z
        gp = dw - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(gp != 0, g / gp, 0.0)
        step = np.where(alive, step, 0.0)
        z = z - step
        moved = np.abs(step)
        if not np.any(alive & (moved > 1e-14)):
            break
        alive &= np.abs(z) < 1e6
    w, dw, ok = _forward_orbit_arrays(m, z, n)
    resid = np.abs(w - z)
    # attainable residual floor grows with the orbit derivative
    floor = np.maximum(tol.newton_residual, np.abs(dw) * 1e-14)
    good = alive & ok & (resid <= floor)
    return z, dw, good


def _dedup(points: np.ndarray, tol: float):
    """Merge numerically coincident points; deterministic representatives.

    Returns representatives sorted lexicographically by (re, im).
    """
    if points.size == 0:
        return points
    xy = np.column_stack([points.real, points.imag])
    tree = cKDTree(xy)
    pairs = tree.query_pairs(r=tol, output_type="ndarray")
    parent = np.arange(len(points))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(points))])
    reps = []
    for r in np.unique(roots):
        members = points[roots == r]
        order = np.lexsort((members.imag, members.real))
        reps.append(members[order[0]])
    reps = np.array(reps)
    order = np.lexsort((reps.imag, reps.real))
    return reps[order]


def _collision_scan(points: np.ndarray, tol: float):
    """Raise if distinct representatives sit suspiciously close.

    After polishing, genuine duplicates coincide far below the dedup
    tolerance, so any surviving pair within 100x of it signals that two
    real orbits are colliding with the tolerance.
    """
    if points.size < 2:
        return
    xy = np.column_stack([points.real, points.imag])
    tree = cKDTree(xy)
    pairs = tree.query_pairs(r=100.0 * tol, output_type="ndarray")
    if len(pairs):
        a, b = pairs[0]
        d = abs(points[a] - points[b])
        raise ToleranceCollisionError(
            f"tolerance collision: points {points[a]} and {points[b]} at distance {d:.3e}")


def _pullback_candidates(m: RationalMap, n: int, max_rounds: int = 80):
    """One inverse-branch contraction per binary word of length n.

    Words whose contraction fails to settle are returned anyway; Newton
    polishing decides their fate.
    """
    c = m.c
    count = 1 << n
    ks = np.arange(count, dtype=np.int64)
    bits = (ks[:, None] >> np.arange(n, dtype=np.int64)[None, :]) & 1
    signs = (1.0 - 2.0 * bits).astype(complex)
    z = np.full(count, _PULLBACK_START, dtype=complex)
    prev = z.copy()
    with np.errstate(invalid="ignore"):
        for r in range(max_rounds):
            for j in range(n - 1, -1, -1):
                z = signs[:, j] * np.sqrt(z - c)
            move = np.abs(z - prev)
            if r >= 4 and np.nanmax(move) < 1e-12:
                break
            prev = z.copy()
    return z[np.isfinite(z)]


def _backward_cloud(m: RationalMap, size: int, rng, steps: int = 48):
    """Random backward orbits; the cloud accumulates on the Julia set."""
    if m.kind == "quadratic":
        c = m.c
        z = np.full(size, _PULLBACK_START, dtype=complex)
        for _ in range(steps):
            signs = 1.0 - 2.0 * rng.integers(0, 2, size=size)
            z = signs * np.sqrt(z - c)
        return z
    # general polynomial: batched companion eigenvalues, one random branch each
    d = m.degree
    lead = m.coeffs[-1]
    z = np.full(size, _PULLBACK_START, dtype=complex)
    comp = np.zeros((size, d, d), dtype=complex)
    comp[:, 1:, :-1] = np.eye(d - 1)
    for _ in range(steps):
        comp[:, :, -1] = 0
        consts = (m.coeffs[0] - z) / lead
        comp[:, 0, -1] = -consts
        for k in range(1, d):
            comp[:, k, -1] = -m.coeffs[k] / lead
        roots = np.linalg.eigvals(comp)
        pick = rng.integers(0, d, size=size)
        z = roots[np.arange(size), pick]
    return z


def _julia_points_at_level(m: RationalMap, n: int, tol: Tolerances,
                           expected_julia: int, method: str, rng):
    """All distinct Julia-set solutions of h^n(z) = z, reconciled in count."""
    if method == "pullback":
        cand = _pullback_candidates(m, n)
    else:
        cand = _backward_cloud(m, max(64, 2 * m.degree ** n), rng)
    roots, dw, good = _newton_polish(m, n, cand, tol)
    roots = roots[good]
    dw = dw[good]
    repelling = np.abs(dw) > 1.0
    pts = _dedup(roots[repelling], tol.dedup)

    # rescue: hunt missing roots from random backward seeds
    budget = 10 * m.degree ** n
    spent = 0
    while len(pts) < expected_julia and spent < budget:
        seeds = _backward_cloud(m, min(budget - spent, max(256, 1 << n)), rng)
        spent += len(seeds)
        extra, dwx, okx = _newton_polish(m, n, seeds, tol)
        extra = extra[okx & (np.abs(dwx) > 1.0)]
        if extra.size:
            pts = _dedup(np.concatenate([pts, extra]), tol.dedup)

    _collision_scan(pts, tol.dedup)
    if len(pts) != expected_julia:
        raise IncompleteEnumerationError(
            n, expected_julia, len(pts),
            detail=f"method={method}, non-convergent seeds={int(np.sum(~good))}")
    return pts


def _primitive_periods(m: RationalMap, pts: np.ndarray, n: int, match_tol: float):
    """Least m <= n with h^m(z) back within match tolerance of z."""
    prim = np.full(len(pts), n, dtype=int)
    w = pts.copy()
    undecided = np.ones(len(pts), dtype=bool)
    for j in range(1, n):
        w = m._eval_raw(w)
        hit = undecided & (np.abs(w - pts) < match_tol)
        prim[hit] = j
        undecided &= ~hit
    return prim


def _default_method(m: RationalMap, method):
    if method is not None:
        return method
    return "pullback" if m.kind == "quadratic" else "newton"


def enumerate_fixed_points(m: RationalMap, n: int, method: str | None = None,
                           tolerances: Tolerances | None = None,
                           rng=None, hyper: HyperbolicityReport | None = None):
    """All solutions of h^n(z) = z: Julia-set ones found by iteration plus
    the known finite attracting periodic points of period dividing n.

    Raises IncompleteEnumerationError when the distinct solutions do not
    reconcile with the degree count d**n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tol = tolerances or Tolerances()
    method = _default_method(m, method)
    if method not in ("pullback", "newton"):
        raise ValueError(f"unknown enumeration method {method!r}")
    if method == "pullback" and m.kind != "quadratic":
        raise ValueError("pullback enumeration requires the quadratic family")
    if rng is None:
        rng = np.random.default_rng(0)
    if hyper is None:
        hyper = classify_hyperbolicity(m)
    expected_total = m.degree ** n
    attracting = hyper.attracting_point_count(n)
    julia = _julia_points_at_level(m, n, tol, expected_total - attracting, method, rng)

    match_tol = 1e-7
    prim = _primitive_periods(m, julia, n, match_tol)
    points = [PeriodicPoint(complex(z), n, int(p)) for z, p in zip(julia, prim)]
    for cyc in hyper.finite_cycles():
        if n % cyc.period == 0:
            for z in cyc.points:
                points.append(PeriodicPoint(complex(z), n, cyc.period))
    return points


# ---------------------------------------------------------------------------
# the catalog
# ---------------------------------------------------------------------------

class OrbitCatalog:
    """All primitive repelling orbits of a map up to period n_max.

    Immutable after construction; numpy views of periods, log-multipliers
    and angles are precomputed for the statistics modules.
    """

    def __init__(self, m: RationalMap, n_max: int, orbits, completeness,
                 hyper: HyperbolicityReport, tolerances: Tolerances,
                 rng_seed: int = 0):
        self.map = m
        self.n_max = n_max
        self.orbits = tuple(orbits)
        self.completeness = dict(completeness)
        self.hyperbolicity = hyper
        self.tolerances = tolerances
        self.rng_seed = rng_seed
        self.periods = np.array([o.period for o in self.orbits], dtype=int)
        self.log_mods = np.array([o.multiplier.log_modulus for o in self.orbits])
        self.angles = np.array([o.multiplier.angle for o in self.orbits])

    # -- views ---------------------------------------------------------

    def orbits_of_period(self, n: int):
        return tuple(o for o in self.orbits if o.period == n)

    def orbit_count(self, n: int) -> int:
        return int(np.sum(self.periods == n))

    def julia_fix_count(self, n: int) -> int:
        """#Fix(h^n) on the Julia set, from the completeness reports."""
        return self.completeness[n].found_count

    def config_hash(self) -> str:
        key = json.dumps({
            "map": self.map.spec_string(),
            "n_max": self.n_max,
            "tolerances": self.tolerances.as_dict(),
        }, sort_keys=True)
        return hashlib.sha256(key.encode()).hexdigest()

    def multiplier_band(self):
        """(min, max) of log|multiplier| / period over the catalog."""
        ratios = self.log_mods / self.periods
        return float(ratios.min()), float(ratios.max())

    # -- persistence -----------------------------------------------------

    def to_json_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "map": {
                "kind": self.map.kind,
                "coeffs": [[w.real, w.imag] for w in self.map.coeffs],
                "degree": self.map.degree,
            },
            "n_max": self.n_max,
            "rng_seed": self.rng_seed,
            "tolerances": self.tolerances.as_dict(),
            "config_hash": self.config_hash(),
            "completeness": [
                {"n": r.n, "expected_count": r.expected_count,
                 "found_count": r.found_count,
                 "attracting_excluded": r.attracting_excluded}
                for r in (self.completeness[n] for n in sorted(self.completeness))
            ],
            "attracting_cycles": [
                {"period": c.period,
                 "points": [[p.real, p.imag] for p in c.points],
                 "log_modulus": None if c.multiplier is None else c.multiplier.log_modulus,
                 "angle": None if c.multiplier is None else c.multiplier.angle,
                 "superattracting": c.superattracting,
                 "at_infinity": c.at_infinity}
                for c in self.hyperbolicity.attracting_cycles
            ],
            "orbits": [
                {"period": o.period,
                 "points": [[p.real, p.imag] for p in o.points],
                 "log_modulus": o.multiplier.log_modulus,
                 "angle": o.multiplier.angle}
                for o in self.orbits
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "OrbitCatalog":
        from .maps import AttractingCycle  # local: avoids an import cycle at module load
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise CatalogFormatError(f"catalog parse error at byte {e.pos}: {e.msg}") from e
        if not isinstance(data, dict) or data.get("schema_version") != SCHEMA_VERSION:
            raise CatalogFormatError(
                f"schema version mismatch: expected {SCHEMA_VERSION}, "
                f"got {data.get('schema_version')!r}")
        md = data["map"]
        m = RationalMap(md["kind"], tuple(complex(a, b) for a, b in md["coeffs"]),
                        md["degree"])
        orbits = [
            PrimitiveOrbit(o["period"],
                           tuple(complex(a, b) for a, b in o["points"]),
                           LogPolar(o["log_modulus"], o["angle"]))
            for o in data["orbits"]
        ]
        completeness = {
            r["n"]: LevelReport(r["n"], r["expected_count"], r["found_count"],
                                r["attracting_excluded"])
            for r in data["completeness"]
        }
        cycles = tuple(
            AttractingCycle(c["period"],
                            tuple(complex(a, b) for a, b in c["points"]),
                            None if c["log_modulus"] is None
                            else LogPolar(c["log_modulus"], c["angle"]),
                            c["superattracting"], c["at_infinity"])
            for c in data["attracting_cycles"]
        )
        hyper = HyperbolicityReport(cycles, True, 0)
        tol = Tolerances(**data["tolerances"])
        return cls(m, data["n_max"], orbits, completeness, hyper, tol,
                   data.get("rng_seed", 0))

    def write_orbits_csv(self, path):
        with open(path, "w") as fh:
            fh.write("period,z0_re,z0_im,log_abs_multiplier,angle\n")
            for o in self.orbits:
                fh.write(f"{o.period},{o.z0.real!r},{o.z0.imag!r},"
                         f"{o.multiplier.log_modulus!r},{o.multiplier.angle!r}\n")


def _group_orbits(m: RationalMap, pts: np.ndarray, n: int, match_tol: float):
    """Partition primitive period-n points into cycles via forward matching."""
    if pts.size == 0:
        return []
    xy = np.column_stack([pts.real, pts.imag])
    tree = cKDTree(xy)
    images = pts.copy()
    images = m._eval_raw(images)
    dist, idx = tree.query(np.column_stack([images.real, images.imag]), k=1)
    if np.any(dist > match_tol):
        bad = int(np.argmax(dist))
        raise IncompleteEnumerationError(
            n, len(pts), len(pts),
            detail=f"forward image of {pts[bad]} missing (distance {dist[bad]:.3e})")
    perm = np.asarray(idx)
    seen = np.zeros(len(pts), dtype=bool)
    cycles = []
    for start in range(len(pts)):
        if seen[start]:
            continue
        cyc = [start]
        seen[start] = True
        j = perm[start]
        while j != start:
            if seen[j]:
                raise ToleranceCollisionError(
                    f"orbit grouping collapsed at period {n}: point matched twice")
            cyc.append(int(j))
            seen[j] = True
            j = perm[j]
        if len(cyc) != n:
            raise IncompleteEnumerationError(
                n, n, len(cyc), detail="cycle length does not match primitive period")
        cycles.append(cyc)
    orbits = []
    for cyc in cycles:
        pos = min(range(len(cyc)), key=lambda k: (pts[cyc[k]].real, pts[cyc[k]].imag))
        ordered = cyc[pos:] + cyc[:pos]
        orbits.append(tuple(complex(pts[i]) for i in ordered))
    return orbits


def build_catalog(m: RationalMap, n_max: int, tolerances: Tolerances | None = None,
                  method: str | None = None, rng_seed: int = 0) -> OrbitCatalog:
    """Enumerate every level up to n_max and assemble the orbit catalog.

    Only repelling orbits enter the catalog; finite attracting cycles are
    kept on the side for completeness accounting.
    """
    tol = tolerances or Tolerances()
    method = _default_method(m, method)
    cap = 16 if m.kind == "quadratic" else max(2, int(16 / math.log2(m.degree)))
    if not (1 <= n_max <= cap):
        raise ValueError(f"n_max must be between 1 and {cap} for this map")
    hyper = classify_hyperbolicity(m)
    if not hyper.all_critical_orbits_converged:
        raise ValueError("map failed the hyperbolicity desk check; "
                         "catalog construction requires settled critical orbits")
    rng = np.random.default_rng(rng_seed)
    match_tol = 1e-7

    orbits = []
    completeness = {}
    for n in range(1, n_max + 1):
        expected_total = m.degree ** n
        attracting = hyper.attracting_point_count(n)
        julia = _julia_points_at_level(m, n, tol, expected_total - attracting,
                                       method, rng)
        completeness[n] = LevelReport(n, expected_total, len(julia), attracting)
        prim = _primitive_periods(m, julia, n, match_tol)
        prim_pts = julia[prim == n]
        if len(prim_pts) % n != 0:
            raise IncompleteEnumerationError(
                n, len(prim_pts) // n * n, len(prim_pts),
                detail="primitive point count not divisible by the period")
        for cycle_points in _group_orbits(m, prim_pts, n, match_tol):
            _, mult = iterate_with_derivative(m, cycle_points[0], n)
            if mult.log_modulus <= 0:
                continue  # attracting side; completeness holds it separately
            orbits.append(PrimitiveOrbit(n, cycle_points, mult))
    orbits.sort(key=lambda o: (o.period, o.multiplier.angle,
                               o.multiplier.log_modulus, o.z0.real, o.z0.imag))
    return OrbitCatalog(m, n_max, orbits, completeness, hyper, tol, rng_seed)


def from_map_spec(spec: str, n_max: int, **kwargs) -> OrbitCatalog:
    return build_catalog(parse_map_spec(spec), n_max, **kwargs)


def synthetic_catalog(orbit_data, m: RationalMap | None = None,
                      n_max: int | None = None) -> OrbitCatalog:
    """Catalog built from explicit (period, log_modulus, angle) triples.

    Degenerate-oracle helper: statistics that only read multipliers can be
    checked against hand-computable configurations.  Points are placed on
    the unit circle as placeholders.
    """
    if m is None:
        m = RationalMap.quadratic(0)
    orbits = []
    for period, log_mod, angle in orbit_data:
        pts = tuple(np.exp(2j * math.pi * (k / period)) for k in range(period))
        orbits.append(PrimitiveOrbit(period, pts, LogPolar(log_mod, angle)))
    orbits.sort(key=lambda o: (o.period, o.multiplier.angle, o.multiplier.log_modulus))
    n_max = n_max or max(o.period for o in orbits)
    completeness = {}
    hyper = HyperbolicityReport((), True, 0)
    return OrbitCatalog(m, n_max, orbits, completeness, hyper, Tolerances())


@dataclass(frozen=True)
class MobiusReport:
    n: int
    fix_count: int              # #Fix(h^n) on the Julia set
    primitive_found: int        # n * (number of period-n repelling orbits)
    primitive_expected: int     # sum_{d|n} mu(n/d) #Fix(h^d)
    partition_ok: bool          # sum_{d|n} d * #orbits(d) == #Fix(h^n)
    ok: bool
    detail: str = ""


def mobius_check(catalog: OrbitCatalog, n: int) -> MobiusReport:
    """Divisor bookkeeping between levels and primitive orbit counts."""
    if n > catalog.n_max:
        raise ValueError("n exceeds the catalog period cap")
    fix_n = catalog.julia_fix_count(n)
    primitive_found = n * catalog.orbit_count(n)
    primitive_expected = sum(mobius(n // d) * catalog.julia_fix_count(d)
                             for d in divisors(n))
    partition = sum(d * catalog.orbit_count(d) for d in divisors(n))
    partition_ok = partition == fix_n
    ok = partition_ok and primitive_found == primitive_expected
    detail = ""
    if not ok:
        detail = (f"Fix(h^{n})={fix_n}, sum d*orbits(d)={partition}, "
                  f"primitive found={primitive_found}, expected={primitive_expected}")
    return MobiusReport(n, fix_n, primitive_found, primitive_expected,
                        partition_ok, ok, detail)


def partition_identity_ok(catalog: OrbitCatalog, n: int) -> bool:
    """sum_{d|n} d * #orbits(d), attracting cycles included, equals degree**n."""
    total = 0
    for d in divisors(n):
        total += d * (catalog.orbit_count(d)
                      + catalog.hyperbolicity.attracting_cycle_count(d))
    return total == catalog.map.degree ** n
