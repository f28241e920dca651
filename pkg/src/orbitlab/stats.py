"""Counting functions over the multiplier spectrum and their statistics.

Everything here reads an immutable orbit catalog: sharp counts of orbits
with norm below a cutoff and angle inside a window, their smooth
relatives (a bump in the norm times a window in the angle), expectations
and variances over the window center, and the experiment reports built
from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .catalog import OrbitCatalog
from .maps import wrap_angle, wrap_angle_array
from .windows import TestFunction, WindowFunction

TAU = 2.0 * math.pi


@dataclass(frozen=True)
class ThetaGrid:
    """Uniform grid on (-pi, pi] used as the window-center ensemble."""

    m: int
    points: np.ndarray

    @classmethod
    def uniform(cls, m: int) -> "ThetaGrid":
        if m < 16:
            raise ValueError("grid needs at least 16 points")
        pts = -math.pi + TAU * (np.arange(1, m + 1) / m)
        return cls(m, pts)


def default_grid_size(K: int) -> int:
    """Resolves the window width pi/K with at least 8 samples."""
    return max(4096, 16 * K)


def _require_grid(grid: ThetaGrid, K: int):
    if grid.m < 16 * K:
        raise ValueError(f"theta grid of size {grid.m} is too coarse for K={K} "
                         f"(needs at least {16 * K})")


@dataclass(frozen=True)
class CharacterWeight:
    """Unit-modulus character value x**k evaluated at a holonomy."""

    k: int
    value: complex

    def __post_init__(self):
        if abs(abs(self.value) - 1.0) > 1e-12:
            raise ValueError("character weight must have unit modulus")


def character_weight(angle: float, k: int) -> CharacterWeight:
    return CharacterWeight(k, complex(math.cos(k * angle), math.sin(k * angle)))


# ---------------------------------------------------------------------------
# sharp counts
# ---------------------------------------------------------------------------

def count_orbits(catalog: OrbitCatalog, t: float) -> int:
    """Number of orbits with |multiplier| < t."""
    if t <= 0:
        return 0
    return int(np.sum(catalog.log_mods < math.log(t)))


def _circular_distance(angles, theta):
    return np.abs(wrap_angle_array(np.asarray(angles) - theta))


def count_in_window(catalog: OrbitCatalog, K: int, t: float, theta: float) -> int:
    """Orbits with |multiplier| < t and angle within pi/K of theta.

    Interval endpoints are closed; ties land inside (a measure-zero choice
    fixed for determinism).
    """
    mask = catalog.log_mods < math.log(t)
    if not np.any(mask):
        return 0
    d = _circular_distance(catalog.angles[mask], theta)
    return int(np.sum(d <= math.pi / K + 1e-15))


# ---------------------------------------------------------------------------
# smooth counts
# ---------------------------------------------------------------------------

def _primitive_terms(catalog: OrbitCatalog, t: float, test_fn: TestFunction):
    """(weight, angle) per orbit for the primitive smooth count at cutoff t.

    weight = phi(|multiplier|/t) * log|multiplier|; orbits outside the
    support of the cutoff drop out.
    """
    log_t = math.log(t)
    lo = log_t + math.log(test_fn.support_lo) - 1e-12
    mask = (catalog.log_mods > lo) & (catalog.log_mods < log_t)
    L = catalog.log_mods[mask]
    A = catalog.angles[mask]
    w = test_fn.phi_array(np.exp(L - log_t)) * L
    keep = w > 0
    return w[keep], A[keep], L[keep]

def _imprimitive_terms(catalog: OrbitCatalog, t: float, test_fn: TestFunction):
    """Repeated-traversal terms (m >= 2): weight phi(|lambda|^m/t) log|lambda|.

    The angle carried by a repetition is m times the orbit angle.  Truncation
    is automatic: m log|lambda| must land within the cutoff support.
    """
    log_t = math.log(t)
    lo = log_t + math.log(test_fn.support_lo) - 1e-12
    ws, angs, base = [], [], []
    m = 2
    min_l = float(catalog.log_mods.min()) if len(catalog.log_mods) else 1.0
    while m * min_l <= log_t and m < 10000:
        Lm = m * catalog.log_mods
        mask = (Lm > lo) & (Lm < log_t)
        if np.any(mask):
            w = test_fn.phi_array(np.exp(Lm[mask] - log_t)) * catalog.log_mods[mask]
            keep = w > 0
            ws.append(w[keep])
            angs.append(wrap_angle_array(m * catalog.angles[mask][keep]))
            base.append(catalog.log_mods[mask][keep])
        m += 1
    if not ws:
        z = np.zeros(0)
        return z, z, z
    return np.concatenate(ws), np.concatenate(angs), np.concatenate(base)


def _terms(catalog, t, test_fn, primitive_only):
    w, a, l = _primitive_terms(catalog, t, test_fn)
    if primitive_only:
        return w, a
    wi, ai, _ = _imprimitive_terms(catalog, t, test_fn)
    return np.concatenate([w, wi]), np.concatenate([a, ai])


def lambda_sum(catalog: OrbitCatalog, t: float, n: int, k: int,
               test_fn: TestFunction, primitive_only: bool = True) -> complex:
    """Level-n character-weighted cutoff sum.

    (1/n) sum over Fix(h^n) of phi(|(h^n)'|/t) * holonomy**k * log|(h^n)'|,
    with Fix(h^n) rebuilt from primitive orbits of period d | n: each orbit
    contributes phi(|lambda|**(n/d)/t) e^{i k (n/d) angle} log|lambda|.
    """
    if n > catalog.n_max:
        raise ValueError("n exceeds the catalog period cap")
    log_t = math.log(t)
    total = 0j
    for d in range(1, n + 1):
        if n % d != 0:
            continue
        if primitive_only and d != n:
            continue
        mask = catalog.periods == d
        if not np.any(mask):
            continue
        m = n // d
        L = catalog.log_mods[mask]
        A = catalog.angles[mask]
        x = np.exp(m * L - log_t)
        w = test_fn.phi_array(x) * L
        total += np.sum(w * np.exp(1j * k * m * A))
    return complex(total)


def smooth_count_direct(catalog: OrbitCatalog, t: float, theta: float,
                        window: WindowFunction, test_fn: TestFunction,
                        primitive_only: bool = True) -> float:
    """Smooth window count by direct summation over catalog orbits."""
    w, a = _terms(catalog, t, test_fn, primitive_only)
    if w.size == 0:
        return 0.0
    return float(np.sum(w * window.eval(a - theta)))


def _fourier_level_sums(catalog, t, test_fn, k_max, primitive_only):
    """S_k = sum over terms of weight * e^{i k angle}, for k = 0..k_max."""
    w, a = _terms(catalog, t, test_fn, primitive_only)
    if w.size == 0:
        return np.zeros(k_max + 1, dtype=complex)
    phases = np.exp(1j * np.outer(np.arange(k_max + 1), a))
    return phases @ w.astype(complex)


def smooth_count_fourier(catalog: OrbitCatalog, t: float, theta: float,
                         window: WindowFunction, test_fn: TestFunction,
                         primitive_only: bool = True) -> float:
    """Smooth window count through the truncated Fourier series of the window."""
    S = _fourier_level_sums(catalog, t, test_fn, window.k_max, primitive_only)
    ks = np.arange(1, window.k_max + 1)
    coeffs = np.array([window.fourier_coefficient(k) for k in range(window.k_max + 1)])
    val = coeffs[0] * S[0].real
    val += 2.0 * np.sum(coeffs[1:] * (np.exp(-1j * ks * theta) * S[1:]).real)
    return float(val / window.K)


def expectation_phi_star_exact(catalog: OrbitCatalog, t: float,
                               window: WindowFunction, test_fn: TestFunction,
                               primitive_only: bool = True) -> float:
    """Exact window-center average: (1/K) fhat(0) * sum of cutoff weights."""
    w, _ = _terms(catalog, t, test_fn, primitive_only)
    return float(window.f_hat_0 * np.sum(w) / window.K)


def expectation_variance(values) -> tuple[float, float]:
    """Mean and variance over a uniform periodic grid (trapezoid = mean)."""
    v = np.asarray(values)
    e = float(np.mean(v))
    var = float(np.mean(np.abs(v - e) ** 2))
    return e, var


@dataclass(frozen=True)
class SmoothCountReport:
    K: int
    t: float
    gamma: float
    theta_values: np.ndarray
    expectation: float
    variance: float
    evaluation_path: str
    k_max_used: int


def smooth_count_report(catalog: OrbitCatalog, t: float, grid: ThetaGrid,
                        window: WindowFunction, test_fn: TestFunction,
                        primitive_only: bool = True,
                        path: str = "direct") -> SmoothCountReport:
    """Evaluate the smooth count on the whole grid of window centers."""
    _require_grid(grid, window.K)
    thetas = grid.points
    if path == "direct":
        w, a = _terms(catalog, t, test_fn, primitive_only)
        vals = np.zeros(grid.m)
        chunk = 512
        for i in range(0, grid.m, chunk):
            th = thetas[i:i + chunk]
            vals[i:i + chunk] = (window.eval(a[None, :] - th[:, None]) @ w)
    elif path == "fourier":
        S = _fourier_level_sums(catalog, t, test_fn, window.k_max, primitive_only)
        coeffs = np.array([window.fourier_coefficient(k)
                           for k in range(window.k_max + 1)])
        ks = np.arange(1, window.k_max + 1)
        base = coeffs[0] * S[0].real
        phase = np.exp(-1j * np.outer(thetas, ks))
        vals = (base + 2.0 * (phase * (coeffs[1:] * S[1:])).real.sum(axis=1)) / window.K
    else:
        raise ValueError(f"unknown evaluation path {path!r}")
    e, var = expectation_variance(vals)
    return SmoothCountReport(window.K, t, test_fn.gamma, vals, e, var, path,
                             window.k_max)


# ---------------------------------------------------------------------------
# experiment reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntervalRow:
    lo: float
    hi: float
    t: float
    count: int
    ratio: float
    target: float


def interval_ratio_report(catalog: OrbitCatalog, intervals, t_grid):
    """Fraction of angles inside fixed intervals against |I| / 2pi."""
    rows = []
    for lo, hi in intervals:
        if not (-math.pi <= lo < hi <= math.pi):
            raise ValueError("intervals must sit inside (-pi, pi]")
        for t in t_grid:
            t = float(t)
            mask = catalog.log_mods < math.log(t)
            n_t = int(np.sum(mask))
            inside = int(np.sum((catalog.angles[mask] > lo)
                                & (catalog.angles[mask] <= hi)))
            ratio = inside / n_t if n_t else float("nan")
            rows.append(IntervalRow(lo, hi, t, inside, ratio, (hi - lo) / TAU))
    return rows


def exact_window_variance(angles, K: int) -> float:
    """Variance of the sharp window count from pairwise angle geometry.

    The count is a sum of indicators of width 2pi/K; a pair of angles at
    circular distance d contributes max(0, 2pi/K - d)/2pi to the second
    moment.  Exact, no grid.
    """
    a = np.asarray(angles, dtype=float)
    n = len(a)
    if n == 0:
        return 0.0
    width = TAU / K
    diff = wrap_angle_array(a[:, None] - a[None, :])
    overlap = np.maximum(0.0, width - np.abs(diff)) / TAU
    second = float(np.sum(overlap))
    mean = n / K
    return second - mean * mean


@dataclass(frozen=True)
class VarianceRow:
    K: int
    t: float
    n_t: int
    expectation: float
    variance: float
    ratio: float            # variance * K / N_t
    regime_ok: bool         # N_t <= K / 10


def variance_ratio_report(catalog: OrbitCatalog, K_list, t: float):
    """Sharp-count variance against the sparse-regime law Var ~ N_t / K."""
    log_t = math.log(t)
    mask = catalog.log_mods < log_t
    angles = catalog.angles[mask]
    n_t = int(np.sum(mask))
    rows = []
    for K in K_list:
        K = int(K)
        var = exact_window_variance(angles, K)
        ratio = var * K / n_t if n_t else float("nan")
        rows.append(VarianceRow(K, t, n_t, n_t / K, var, ratio, n_t <= K / 10))
    return rows


def miss_fraction(catalog: OrbitCatalog, K: int, t: float, grid: ThetaGrid) -> float:
    """Fraction of grid centers whose window catches no multiplier angle."""
    _require_grid(grid, K)
    mask = catalog.log_mods < math.log(t)
    angles = np.sort(catalog.angles[mask])
    if angles.size == 0:
        return 1.0
    half = math.pi / K + 1e-15
    # pad with wrapped copies so nearest-neighbor search ignores the seam
    padded = np.concatenate([angles - TAU, angles, angles + TAU])
    idx = np.searchsorted(padded, grid.points)
    left = np.clip(idx - 1, 0, len(padded) - 1)
    right = np.clip(idx, 0, len(padded) - 1)
    dist = np.minimum(np.abs(grid.points - padded[left]),
                      np.abs(padded[right] - grid.points))
    return float(np.mean(dist > half))


@dataclass(frozen=True)
class ScalingRow:
    t: float
    e_star: float
    var_star: float
    e_diff: float       # |E(full) - E(primitive)|, exact
    l2_diff: float      # grid mean of |full - primitive|^2


@dataclass(frozen=True)
class ScalingReport:
    rows: tuple[ScalingRow, ...]
    slopes: dict


def scaling_report(catalog: OrbitCatalog, t_grid, window: WindowFunction,
                   test_fn: TestFunction, grid: ThetaGrid,
                   delta_hat: float) -> ScalingReport:
    """Growth of the smooth-count expectation and variance across a t sweep.

    Slopes are least-squares fits of log-quantities against the reference
    scales; the variance bounds are reported as fitted constants of
    one-sided comparisons, never asserted.
    """
    _require_grid(grid, window.K)
    rows = []
    for t in t_grid:
        t = float(t)
        rep_star = smooth_count_report(catalog, t, grid, window, test_fn,
                                       primitive_only=True)
        w_star, a_star = _terms(catalog, t, test_fn, True)
        w_full, a_full = _terms(catalog, t, test_fn, False)
        e_star_exact = expectation_phi_star_exact(catalog, t, window, test_fn, True)
        e_full_exact = expectation_phi_star_exact(catalog, t, window, test_fn, False)
        # grid of the full-minus-primitive difference (imprimitive terms only)
        wi, ai, _ = _imprimitive_terms(catalog, t, test_fn)
        diff_vals = np.zeros(grid.m)
        if wi.size:
            chunk = 512
            for i in range(0, grid.m, chunk):
                th = grid.points[i:i + chunk]
                diff_vals[i:i + chunk] = window.eval(ai[None, :] - th[:, None]) @ wi
        l2 = float(np.mean(diff_vals ** 2))
        rows.append(ScalingRow(t, e_star_exact, rep_star.variance,
                               abs(e_full_exact - e_star_exact), l2))
    ts = np.array([r.t for r in rows])
    e_star = np.array([r.e_star for r in rows])
    var_star = np.array([r.var_star for r in rows])
    log_t = np.log(ts)
    x_main = delta_hat * log_t + np.log(np.log(ts))
    slopes = {}
    good = e_star > 0
    if np.sum(good) >= 2:
        slopes["e_star_vs_t_delta_log_t"] = float(
            np.polyfit(x_main[good], np.log(window.K * e_star[good]), 1)[0])
    ref_var = (ts ** delta_hat) * np.log(ts) ** 2 / window.K
    goodv = var_star > 0
    if np.sum(goodv) >= 2:
        slopes["var_star_vs_reference"] = float(
            np.polyfit(np.log(ref_var[goodv]), np.log(var_star[goodv]), 1)[0])
        slopes["var_star_fitted_constant"] = float(np.max(var_star / ref_var))
    e_diff = np.array([r.e_diff for r in rows])
    ref_diff = (ts ** (delta_hat / 2)) * np.log(ts) / window.K
    goodd = e_diff > 0
    if np.sum(goodd) >= 2:
        slopes["e_diff_vs_reference"] = float(
            np.polyfit(np.log(ref_diff[goodd]), np.log(e_diff[goodd]), 1)[0])
        slopes["e_diff_fitted_constant"] = float(np.max(e_diff / ref_diff))
    l2 = np.array([r.l2_diff for r in rows])
    ref_l2 = (ts ** delta_hat) * np.log(ts) ** 2 / window.K
    goodl = l2 > 0
    if np.sum(goodl) >= 2:
        slopes["l2_diff_fitted_constant"] = float(np.max(l2 / ref_l2))
    return ScalingReport(tuple(rows), slopes)
