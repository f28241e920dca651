"""Julia set dimension from periodic data and the logarithmic integral.

The dimension estimate comes from the periodic-orbit pressure
P_n(s) = (1/n) log sum_{z in Fix(h^n)} |(h^n)'(z)|^(-s): its root s_n
converges to the divergence abscissa of the orbit zeta function, which is
the Hausdorff dimension of the Julia set for the maps in scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .catalog import OrbitCatalog, divisors


@dataclass(frozen=True)
class DimensionEstimate:
    roots: tuple[tuple[int, float], ...]   # (n, s_n) pressure roots
    delta_hat: float
    uncertainty: float

    def aitken(self) -> float:
        """Aitken delta-squared extrapolation of the root sequence."""
        s = [r[1] for r in self.roots]
        if len(s) < 3:
            return self.delta_hat
        d1 = s[-1] - s[-2]
        d2 = s[-1] - 2 * s[-2] + s[-3]
        if d2 == 0:
            return self.delta_hat
        acc = s[-1] - d1 * d1 / d2
        return acc if 0 < acc <= 2 else self.delta_hat


def _level_weights(catalog: OrbitCatalog, n: int):
    """log|(h^n)'| and multiplicity for Fix(h^n) rebuilt from the orbits.

    Each primitive repelling orbit of period d | n contributes d points,
    every one carrying (h^n)' = multiplier**(n/d).
    """
    logs = []
    counts = []
    for d in divisors(n):
        mask = catalog.periods == d
        if not np.any(mask):
            continue
        logs.append((n // d) * catalog.log_mods[mask])
        counts.append(np.full(int(mask.sum()), d, dtype=float))
    if not logs:
        return None, None
    return np.concatenate(logs), np.concatenate(counts)


def pressure(catalog: OrbitCatalog, n: int, s: float) -> float:
    """P_n(s); strictly decreasing and continuous in s."""
    logs, counts = _level_weights(catalog, n)
    if logs is None:
        raise ValueError(f"no periodic data at level {n}")
    z = np.sum(counts * np.exp(-s * logs))
    return math.log(z) / n


def _pressure_root(catalog: OrbitCatalog, n: int, tol: float = 1e-10) -> float:
    lo, hi = 0.0, 2.0
    p_lo = pressure(catalog, n, lo)
    p_hi = pressure(catalog, n, hi)
    if p_lo == 0.0:
        return 0.0
    if p_lo < 0 or p_hi > 0:
        raise ValueError(f"no sign change for the pressure root in [0, 2] at level {n}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pressure(catalog, n, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def estimate_dimension(catalog: OrbitCatalog, n_range=None) -> DimensionEstimate:
    """Pressure root per level; the estimate is the root at the deepest level."""
    if n_range is None:
        n_range = range(1, catalog.n_max + 1)
    roots = []
    for n in n_range:
        if n > catalog.n_max:
            raise ValueError("n_range exceeds the catalog period cap")
        roots.append((n, _pressure_root(catalog, n)))
    if not roots:
        raise ValueError("empty n_range")
    delta_hat = roots[-1][1]
    uncertainty = abs(roots[-1][1] - roots[-2][1]) if len(roots) > 1 else float("inf")
    return DimensionEstimate(tuple(roots), delta_hat, uncertainty)


def li(x: float) -> float:
    """Offset logarithmic integral: integral from 2 to x of du / log u."""
    if x <= 2:
        raise ValueError("li is defined for x > 2")
    val, _ = quad(lambda u: 1.0 / math.log(u), 2.0, x, epsabs=0.0,
                  epsrel=1e-12, limit=400)
    return val


@dataclass(frozen=True)
class TRange:
    """Usable multiplier-norm cutoffs for a finite catalog.

    t_max is completeness-limited: counts with t below it see every orbit,
    because the smallest multiplier at the first missing period is
    extrapolated from the per-period minima.  t_max_coverage is the looser
    0.9 * max|multiplier| at period n_max - 1, which marks how far the
    catalog has any data at all; between the two, counts undercount.
    """

    t_min: float
    t_max: float
    t_max_coverage: float


def reliable_t_range(catalog: OrbitCatalog) -> TRange:
    periods = sorted(set(int(p) for p in catalog.periods))
    if not periods:
        raise ValueError("empty catalog")
    mins = {n: float(catalog.log_mods[catalog.periods == n].min()) for n in periods}
    maxs = {n: float(catalog.log_mods[catalog.periods == n].max()) for n in periods}
    tail = [n for n in periods if n >= periods[-1] - 4]
    if len(tail) >= 2:
        xs = np.array(tail, dtype=float)
        ys = np.array([mins[n] for n in tail])
        slope, intercept = np.polyfit(xs, ys, 1)
        next_min = slope * (catalog.n_max + 1) + intercept
        next_min = max(next_min, mins[periods[-1]])
    else:
        next_min = maxs[periods[-1]]
    t_max = 0.9 * math.exp(next_min)
    cov_period = catalog.n_max - 1
    if cov_period in maxs:
        t_cov = 0.9 * math.exp(maxs[cov_period])
    else:
        t_cov = 0.9 * math.exp(max(maxs.values()))
    t_min = math.exp(min(mins.values()))
    return TRange(t_min, t_max, t_cov)


@dataclass(frozen=True)
class CountRow:
    t: float
    n_t: int
    li_t_delta: float
    ratio: float
    truncated: bool


def orbit_counting_report(catalog: OrbitCatalog, delta_hat: float, t_grid):
    """Orbit counts against the logarithmic-integral main term.

    Rows with t beyond the completeness cutoff are flagged truncated.
    """
    from .stats import count_orbits  # cycle-free: stats imports nothing from here
    trange = reliable_t_range(catalog)
    rows = []
    for t in t_grid:
        t = float(t)
        x = t ** delta_hat
        if x <= 2.0:
            continue
        main = li(x)
        n_t = count_orbits(catalog, t)
        ratio = n_t / main if main > 0 else float("nan")
        rows.append(CountRow(t, n_t, main, ratio, t > trange.t_max))
    return rows
