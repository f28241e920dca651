"""Truncated dynamical zeta and L-functions over the orbit catalog.

Two evaluation routes: the exponential of character-weighted level sums,
and the Euler product over primitive orbits with matched truncation (orbit
period d and repetition m restricted to d*m <= N).  The two routes regroup
the same terms, so they agree to roundoff; products are computed as
exponentials of log-sums to dodge underflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .catalog import OrbitCatalog, divisors


class DivergentFactorError(RuntimeError):
    """An Euler factor had unit-or-larger modulus (Re(s) too small)."""


@dataclass(frozen=True)
class ZetaEvaluation:
    s: complex
    k: int
    truncation_N: int
    value: complex
    path: str


def _check_args(catalog: OrbitCatalog, s: complex, N: int, delta_hint):
    if N < 1 or N > catalog.n_max:
        raise ValueError("truncation depth must satisfy 1 <= N <= n_max")
    if delta_hint is not None and complex(s).real <= delta_hint:
        warnings.warn(f"Re(s) = {complex(s).real} is at or below the estimated "
                      f"dimension {delta_hint}; truncations converge slowly there",
                      RuntimeWarning, stacklevel=3)


def zeta_expsum(catalog: OrbitCatalog, s: complex, k: int, N: int,
                delta_hint: float | None = None) -> complex:
    """exp of the level sums: sum_{n<=N} (1/n) sum_{Fix(h^n)} chi_k |.|^-s.

    Fix(h^n) is rebuilt from primitive orbits of period d | n; a point of
    primitive period d carries (h^n)' = multiplier**(n/d).
    """
    s = complex(s)
    _check_args(catalog, s, N, delta_hint)
    acc = 0j
    for n in range(1, N + 1):
        level = 0j
        for d in divisors(n):
            mask = catalog.periods == d
            if not np.any(mask):
                continue
            m = n // d
            expo = m * (1j * k * catalog.angles[mask] - s * catalog.log_mods[mask])
            level += d * np.sum(np.exp(expo))
        acc += level / n
    return complex(np.exp(acc))


def zeta_euler(catalog: OrbitCatalog, s: complex, k: int, N: int,
               delta_hint: float | None = None) -> complex:
    """Euler product over orbits with matched truncation d*m <= N."""
    s = complex(s)
    _check_args(catalog, s, N, delta_hint)
    acc = 0j
    for o in catalog.orbits:
        if o.period > N:
            continue
        x = np.exp(1j * k * o.multiplier.angle - s * o.multiplier.log_modulus)
        if abs(x) >= 1.0:
            raise DivergentFactorError(
                f"divergent factor |x| = {abs(x):.6f} >= 1 for orbit of period "
                f"{o.period} at s = {s}")
        ms = np.arange(1, N // o.period + 1)
        acc += np.sum(x ** ms / ms)
    return complex(np.exp(acc))


def log_derivative(catalog: OrbitCatalog, s: complex, k: int, N: int,
                   delta_hint: float | None = None) -> complex:
    """Truncated series for -zeta'/zeta at (s, k).

    sum_{n<=N} (1/n) sum_{Fix(h^n)} chi_k(holonomy) log|(h^n)'| / |(h^n)'|^s,
    which is exactly -d/ds of the truncated log of the exp-sum route.
    """
    s = complex(s)
    _check_args(catalog, s, N, delta_hint)
    acc = 0j
    for o in catalog.orbits:
        if o.period > N:
            continue
        L = o.multiplier.log_modulus
        A = o.multiplier.angle
        ms = np.arange(1, N // o.period + 1)
        acc += L * np.sum(np.exp(ms * (1j * k * A - s * L)))
    return complex(acc)


@dataclass(frozen=True)
class ZetaScanRow:
    s: float
    k: int
    N: int
    value: complex
    growth_rate: float
    divergent: bool


@dataclass(frozen=True)
class PoleScanReport:
    rows: tuple[ZetaScanRow, ...]
    pole_estimate: float | None


def _level_sums_abs(catalog: OrbitCatalog, s: float, k: int, N: int):
    """|Z_n(s,k)| for n <= N, Z_n = sum over Fix(h^n) of chi_k |.|^-s."""
    out = np.zeros(N)
    for n in range(1, N + 1):
        level = 0j
        for d in divisors(n):
            mask = catalog.periods == d
            if not np.any(mask):
                continue
            m = n // d
            expo = m * (1j * k * catalog.angles[mask] - s * catalog.log_mods[mask])
            level += d * np.sum(np.exp(expo))
        out[n - 1] = abs(level)
    return out


def pole_scan(catalog: OrbitCatalog, s_grid, N: int | None = None, k: int = 0,
              fit_levels: int = 5) -> PoleScanReport:
    """Divergence onset of the zeta truncations along a real grid.

    For each s the growth rate of the level sums inside the truncation is
    fitted over the deepest levels; the onset is where the fitted rate
    crosses zero (interpolated between grid points).  A heuristic, not
    analytic continuation.
    """
    N = N or catalog.n_max
    if N > catalog.n_max:
        raise ValueError("truncation depth exceeds the catalog")
    s_grid = [float(s) for s in s_grid]
    rows = []
    rates = []
    for s in s_grid:
        z = _level_sums_abs(catalog, s, k, N)
        ns = np.arange(1, N + 1)
        good = z > 0
        ns_f, z_f = ns[good][-fit_levels:], z[good][-fit_levels:]
        if len(ns_f) >= 2:
            rate = float(np.polyfit(ns_f, np.log(z_f), 1)[0])
        else:
            rate = float("nan")
        rates.append(rate)
        with np.errstate(over="ignore"):
            val = zeta_expsum(catalog, complex(s), k, N)
        rows.append(ZetaScanRow(s, k, N, val, rate, rate > 0))
    pole = None
    for i in range(len(s_grid) - 1):
        r0, r1 = rates[i], rates[i + 1]
        if math.isfinite(r0) and math.isfinite(r1) and r0 > 0 >= r1:
            pole = s_grid[i] + (s_grid[i + 1] - s_grid[i]) * r0 / (r0 - r1)
            break
    return PoleScanReport(tuple(rows), pole)
