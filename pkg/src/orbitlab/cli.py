"""Command-line harness: configuration, orchestration, and report emission.

Usage: orbitlab <subcommand> --config <file> [--out DIR] [--seed N]

One JSON config document drives every experiment; outputs are plot-ready
CSV files plus a report.json with a pass/fail summary.  Exit codes:
0 = all checks pass, 1 = config error, 2 = assertion-type check failed,
3 = enumeration incomplete.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import catalog as cat
from . import dimension as dim
from . import lfunctions as lfn
from . import stats
from .maps import parse_map_spec
from .windows import TestFunction, WindowFunction, WindowIdentityError, condition_report

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CHECK = 2
EXIT_INCOMPLETE = 3

SUBCOMMANDS = ("catalog", "dimension", "counts", "window-check", "smooth",
               "variance", "miss", "zeta", "all")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field_name = field_name


@dataclass
class ExperimentConfig:
    """Validated experiment configuration (one JSON document)."""

    map_spec: str
    n_max: int = 10
    method: str | None = None
    t: float | None = None
    t_grid: list | None = None
    K: int = 16
    K_list: list = field(default_factory=lambda: [16, 64, 256, 1024, 4096])
    gamma: float | None = None
    theta_grid_size: int | None = None
    k_max: int | None = None
    tolerances: cat.Tolerances = field(default_factory=cat.Tolerances)
    output_dir: str = "out"
    rng_seed: int = 0
    s_grid: list | None = None
    zeta_N: int | None = None
    intervals: list = field(default_factory=lambda: [[-math.pi, math.pi], [0.0, math.pi]])
    p_max: float = 3.0
    zeta_k: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {"map", "n_max", "method", "t", "t_grid", "K", "K_list", "gamma",
                 "theta_grid_size", "k_max", "tolerances", "output_dir",
                 "rng_seed", "s_grid", "zeta_N", "intervals", "p_max", "zeta_k"}
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown field")
        if "map" not in raw:
            raise ConfigError("map", "required")
        try:
            parse_map_spec(raw["map"])
        except ValueError as e:
            raise ConfigError("map", str(e))
        cfg = cls(map_spec=raw["map"])

        def want(key, types, cond=None, msg=""):
            if key not in raw or raw[key] is None:
                return None
            v = raw[key]
            if not isinstance(v, types) or isinstance(v, bool):
                raise ConfigError(key, f"expected {types}")
            if cond is not None and not cond(v):
                raise ConfigError(key, msg)
            return v

        v = want("n_max", int, lambda x: 1 <= x <= 16, "must be in 1..16")
        if v is not None:
            cfg.n_max = v
        v = want("method", str, lambda x: x in ("pullback", "newton"),
                 "must be 'pullback' or 'newton'")
        if v is not None:
            cfg.method = v
        v = want("t", (int, float), lambda x: x > 1, "must exceed 1")
        if v is not None:
            cfg.t = float(v)
        v = want("t_grid", list, lambda xs: all(isinstance(x, (int, float)) and x > 1
                                                for x in xs), "entries must exceed 1")
        if v is not None:
            cfg.t_grid = [float(x) for x in v]
        v = want("K", int, lambda x: x >= 1, "must be >= 1")
        if v is not None:
            cfg.K = v
        v = want("K_list", list, lambda xs: all(isinstance(x, int) and x >= 1
                                                for x in xs), "entries must be ints >= 1")
        if v is not None:
            cfg.K_list = v
        v = want("gamma", (int, float), lambda x: x > 0, "must be positive")
        if v is not None:
            cfg.gamma = float(v)
        v = want("theta_grid_size", int, lambda x: x >= 16, "must be >= 16")
        if v is not None:
            cfg.theta_grid_size = v
        v = want("k_max", int, lambda x: x >= 0, "must be >= 0")
        if v is not None:
            cfg.k_max = v
        if "tolerances" in raw and raw["tolerances"] is not None:
            t = raw["tolerances"]
            if not isinstance(t, dict):
                raise ConfigError("tolerances", "expected an object")
            extra = set(t) - {"dedup", "newton_residual", "cycle"}
            if extra:
                raise ConfigError("tolerances", f"unknown keys {sorted(extra)}")
            for k2, v2 in t.items():
                if not isinstance(v2, (int, float)) or v2 <= 0:
                    raise ConfigError(f"tolerances.{k2}", "must be a positive number")
            cfg.tolerances = cat.Tolerances(**{k2: float(v2) for k2, v2 in t.items()})
        v = want("output_dir", str)
        if v is not None:
            cfg.output_dir = v
        v = want("rng_seed", int, lambda x: x >= 0, "must be >= 0")
        if v is not None:
            cfg.rng_seed = v
        v = want("s_grid", list, lambda xs: all(isinstance(x, (int, float)) for x in xs),
                 "entries must be numbers")
        if v is not None:
            cfg.s_grid = [float(x) for x in v]
        v = want("zeta_N", int, lambda x: x >= 1, "must be >= 1")
        if v is not None:
            cfg.zeta_N = v
        v = want("intervals", list,
                 lambda xs: all(isinstance(p, list) and len(p) == 2 for p in xs),
                 "entries must be [lo, hi] pairs")
        if v is not None:
            for lo, hi in v:
                if not (-math.pi <= lo < hi <= math.pi):
                    raise ConfigError("intervals", "pairs must satisfy -pi <= lo < hi <= pi")
            cfg.intervals = [[float(a), float(b)] for a, b in v]
        v = want("p_max", (int, float), lambda x: 0 < x <= 3.0, "must be in (0, 3]")
        if v is not None:
            cfg.p_max = float(v)
        v = want("zeta_k", int)
        if v is not None:
            cfg.zeta_k = v

        grid_size = cfg.theta_grid_size
        if grid_size is not None:
            max_k = max([cfg.K] + list(cfg.K_list))
            if grid_size < 16 * max_k:
                raise ConfigError("theta_grid_size",
                                  f"must be at least 16 * max K = {16 * max_k}")
        if cfg.zeta_N is not None and cfg.zeta_N > cfg.n_max:
            raise ConfigError("zeta_N", "cannot exceed n_max")
        return cfg

    def echo(self) -> dict:
        return {
            "map": self.map_spec, "n_max": self.n_max, "method": self.method,
            "t": self.t, "t_grid": self.t_grid, "K": self.K, "K_list": self.K_list,
            "gamma": self.gamma, "theta_grid_size": self.theta_grid_size,
            "k_max": self.k_max, "tolerances": self.tolerances.as_dict(),
            "output_dir": self.output_dir, "rng_seed": self.rng_seed,
            "s_grid": self.s_grid, "zeta_N": self.zeta_N,
            "intervals": self.intervals, "p_max": self.p_max, "zeta_k": self.zeta_k,
        }


def load_config(path: str) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"invalid JSON at byte {e.pos}: {e.msg}")
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# harness
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: Path, header: list[str], rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


class Harness:
    """Shared state for one invocation: catalog cache, checks, timings."""

    def __init__(self, cfg: ExperimentConfig, out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.checks: list[dict] = []
        self.timings: dict[str, float] = {}
        self.results: dict[str, object] = {}
        self._catalog = None
        self._dimension = None

    def check(self, name: str, passed: bool, detail: str = ""):
        self.checks.append({"name": name, "passed": bool(passed), "detail": detail})

    # -- cached building blocks --------------------------------------

    def _cache_key(self) -> str:
        key = json.dumps({"map": self.cfg.map_spec, "n_max": self.cfg.n_max,
                          "tolerances": self.cfg.tolerances.as_dict(),
                          "method": self.cfg.method, "seed": self.cfg.rng_seed},
                         sort_keys=True)
        return hashlib.sha256(key.encode()).hexdigest()[:16]

    def catalog(self) -> cat.OrbitCatalog:
        if self._catalog is not None:
            return self._catalog
        cache_dir = self.out / "cache"
        cache_dir.mkdir(exist_ok=True)
        cache_file = cache_dir / f"catalog_{self._cache_key()}.json"
        t0 = time.perf_counter()
        if cache_file.exists():
            self._catalog = cat.OrbitCatalog.from_json(cache_file.read_text())
        else:
            m = parse_map_spec(self.cfg.map_spec)
            self._catalog = cat.build_catalog(m, self.cfg.n_max,
                                              self.cfg.tolerances,
                                              method=self.cfg.method,
                                              rng_seed=self.cfg.rng_seed)
            cache_file.write_text(self._catalog.to_json())
        self.timings["catalog"] = time.perf_counter() - t0
        return self._catalog

    def dimension(self) -> dim.DimensionEstimate:
        if self._dimension is None:
            self._dimension = dim.estimate_dimension(self.catalog())
        return self._dimension

    def gamma(self) -> float:
        if self.cfg.gamma is not None:
            return self.cfg.gamma
        return self.dimension().delta_hat / 2.0

    def grid_for(self, K: int) -> stats.ThetaGrid:
        size = self.cfg.theta_grid_size or stats.default_grid_size(K)
        return stats.ThetaGrid.uniform(size)

    def window_for(self, K: int, k_max: int | None = None) -> WindowFunction:
        return WindowFunction(K, k_max=k_max if k_max is not None else self.cfg.k_max)

    def auto_t_grid(self, points: int = 12):
        c = self.catalog()
        trange = dim.reliable_t_range(c)
        hi = trange.t_max
        lo = max(trange.t_min * 1.05, hi / 10.0)
        if self.cfg.t_grid:
            return list(self.cfg.t_grid)
        return list(np.geomspace(lo, hi, points))

    # -- subcommands ---------------------------------------------------

    def run_catalog(self):
        c = self.catalog()
        c.write_orbits_csv(self.out / "orbits.csv")
        (self.out / "catalog.json").write_text(c.to_json())
        all_ok = True
        for n in range(1, c.n_max + 1):
            rep = cat.mobius_check(c, n)
            level_ok = rep.ok and c.completeness[n].reconciled
            partition = cat.partition_identity_ok(c, n)
            all_ok &= level_ok and partition
            if not (level_ok and partition):
                self.check(f"catalog.level_{n}", False, rep.detail or "partition failed")
        self.check("catalog.reconciliation", all_ok,
                   f"{len(c.orbits)} orbits up to period {c.n_max}")
        self.results["catalog"] = {
            "orbit_count": len(c.orbits),
            "config_hash": c.config_hash(),
            "per_period": {str(n): c.orbit_count(n) for n in range(1, c.n_max + 1)},
            "multiplier_band": list(c.multiplier_band()),
        }

    def run_dimension(self):
        est = self.dimension()
        self.results["dimension"] = {
            "roots": [[n, s] for n, s in est.roots],
            "delta_hat": est.delta_hat,
            "uncertainty": est.uncertainty,
            "aitken": est.aitken(),
        }
        (self.out / "dimension.json").write_text(
            json.dumps(self.results["dimension"], indent=2, sort_keys=True))
        self.check("dimension.in_range", 0.0 < est.delta_hat <= 2.0,
                   f"delta_hat = {est.delta_hat:.6f}")

    def run_counts(self):
        c = self.catalog()
        est = self.dimension()
        rows = dim.orbit_counting_report(c, est.delta_hat, self.auto_t_grid())
        write_csv(self.out / "counts.csv", ["t", "N_t", "li_t_delta", "ratio"],
                  [(r.t, r.n_t, r.li_t_delta, r.ratio) for r in rows])
        self.results["counts"] = {
            "rows": [[r.t, r.n_t, r.li_t_delta, r.ratio, r.truncated] for r in rows],
            "truncated_t": [r.t for r in rows if r.truncated],
        }
        counts = [r.n_t for r in rows]
        self.check("counts.monotone", all(a <= b for a, b in zip(counts, counts[1:])),
                   "N_t nondecreasing over the grid")

    def run_window_check(self):
        gamma = self.gamma()
        tf = TestFunction(gamma)
        report = {"gamma": gamma, "L_phi": tf.L_phi}
        ok = True
        residuals = {}
        for K in (8, 64, 512):
            w = WindowFunction(K, k_max=8)
            try:
                w.integral_check(a=0.0)
                w.integral_check(a=math.pi / 3)
                residuals[str(K)] = "ok"
            except WindowIdentityError as e:
                residuals[str(K)] = str(e)
                ok = False
        self.check("window.mean_identity", ok, json.dumps(residuals))
        conds = condition_report(tf)
        report["conditions"] = conds
        shift_ok = conds["mellin_shift_residual"] < 1e-10
        self.check("window.mellin_shift", shift_ok,
                   f"residual {conds['mellin_shift_residual']:.2e}")
        inv_err = tf.inversion_check([0.35, 0.5, 0.8], truncation=400.0)
        report["inversion_max_error"] = inv_err
        self.check("window.mellin_inversion", inv_err < 1e-6, f"max error {inv_err:.2e}")
        self.check("window.conditions",
                   conds["window_min_positive"] and conds["support_in_unit_interval"]
                   and conds["decay_monotone_ends"], json.dumps({
                       k: v for k, v in conds.items() if isinstance(v, bool)}))
        self.results["window_check"] = report
        (self.out / "window.json").write_text(json.dumps(report, indent=2,
                                                         sort_keys=True, default=str))

    def run_smooth(self):
        c = self.catalog()
        t = self.cfg.t or self.auto_t_grid()[-1]
        K = self.cfg.K
        grid = self.grid_for(K)
        w = self.window_for(K)
        tf = TestFunction(self.gamma())
        rep_star = stats.smooth_count_report(c, t, grid, w, tf, True, path="direct")
        rep_full = stats.smooth_count_report(c, t, grid, w, tf, False, path="direct")
        write_csv(self.out / "smooth.csv", ["theta", "phi_star", "phi"],
                  zip(grid.points, rep_star.theta_values, rep_full.theta_values))
        # two-path agreement on a probe subset
        probe = grid.points[:: max(1, grid.m // 64)]
        worst = 0.0
        for th in probe:
            a = stats.smooth_count_direct(c, t, th, w, tf, True)
            b = stats.smooth_count_fourier(c, t, th, w, tf, True)
            worst = max(worst, abs(a - b))
        self.check("smooth.two_path", worst < 1e-6, f"max |direct - fourier| = {worst:.2e}")
        exact = stats.expectation_phi_star_exact(c, t, w, tf, True)
        rel = abs(exact - rep_star.expectation) / max(abs(exact), 1e-300)
        self.check("smooth.expectation_identity", rel < 1e-8,
                   f"relative gap {rel:.2e}")
        self.results["smooth"] = {"t": t, "K": K,
                                  "expectation": rep_star.expectation,
                                  "variance": rep_star.variance,
                                  "expectation_exact": exact}
        # scaling sweep over the reliable decade
        est = self.dimension()
        t_grid = self.auto_t_grid()
        scaling = stats.scaling_report(c, t_grid, w, tf, grid, est.delta_hat)
        write_csv(self.out / "scaling.csv",
                  ["t", "E_phi_star", "Var_phi_star", "E_diff", "L2_diff"],
                  [(r.t, r.e_star, r.var_star, r.e_diff, r.l2_diff)
                   for r in scaling.rows])
        self.results["scaling"] = scaling.slopes

    def run_variance(self):
        c = self.catalog()
        t = self.cfg.t or self.auto_t_grid()[-1]
        rows = stats.variance_ratio_report(c, self.cfg.K_list, t)
        write_csv(self.out / "variance.csv", ["K", "t", "N_t", "E", "Var", "ratio"],
                  [(r.K, r.t, r.n_t, r.expectation, r.variance, r.ratio)
                   for r in rows])
        flagged = [r.K for r in rows if not r.regime_ok]
        self.results["variance"] = {
            "rows": [[r.K, r.t, r.n_t, r.expectation, r.variance, r.ratio,
                      r.regime_ok] for r in rows],
            "regime_warnings": flagged,
        }

    def run_miss(self):
        c = self.catalog()
        trange = dim.reliable_t_range(c)
        rows = []
        for K in self.cfg.K_list:
            if K < 1:
                continue
            grid = self.grid_for(K)
            p_top = min(self.cfg.p_max,
                        math.log(trange.t_max_coverage) / math.log(max(K, 2)))
            ps = np.linspace(max(0.5, p_top - 1.5), p_top, 6)
            for p in ps:
                t = float(K) ** float(p)
                rows.append((K, t, stats.miss_fraction(c, K, t, grid)))
        write_csv(self.out / "misses.csv", ["K", "t", "miss_fraction"], rows)
        self.results["miss"] = {"rows": [list(r) for r in rows]}

    def run_zeta(self):
        c = self.catalog()
        est = self.dimension()
        delta = est.delta_hat
        s_grid = self.cfg.s_grid or list(np.linspace(max(0.05, delta - 0.5),
                                                     delta + 0.5, 21))
        N = self.cfg.zeta_N or c.n_max
        report = lfn.pole_scan(c, s_grid, N=N, k=self.cfg.zeta_k)
        write_csv(self.out / "zeta_scan.csv",
                  ["s", "k", "N", "re_value", "im_value", "divergence_flag"],
                  [(r.s, r.k, r.N, r.value.real, r.value.imag, int(r.divergent))
                   for r in report.rows])
        self.results["zeta"] = {
            "pole_estimate": report.pole_estimate,
            "delta_hat": delta,
            "gap": None if report.pole_estimate is None
            else abs(report.pole_estimate - delta),
        }

    def report(self) -> dict:
        passed = all(c["passed"] for c in self.checks)
        return {
            "config": self.cfg.echo(),
            "results": self.results,
            "checks": self.checks,
            "timings_s": self.timings,
            "passed": passed,
        }


def run(subcommand: str, cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Run one subcommand (or 'all') and return the report dictionary."""
    out = Path(out_dir or cfg.output_dir)
    h = Harness(cfg, out)
    steps = {
        "catalog": [h.run_catalog],
        "dimension": [h.run_dimension],
        "counts": [h.run_counts],
        "window-check": [h.run_window_check],
        "smooth": [h.run_smooth],
        "variance": [h.run_variance],
        "miss": [h.run_miss],
        "zeta": [h.run_zeta],
        "all": [h.run_catalog, h.run_dimension, h.run_counts, h.run_window_check,
                h.run_smooth, h.run_variance, h.run_miss, h.run_zeta],
    }[subcommand]
    for step in steps:
        t0 = time.perf_counter()
        step()
        self_name = step.__name__.removeprefix("run_")
        h.timings[self_name] = time.perf_counter() - t0
    report = h.report()
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True,
                                                default=str))
    return report


def save_catalog(catalog: cat.OrbitCatalog, path) -> None:
    Path(path).write_text(catalog.to_json())


def load_catalog(path) -> cat.OrbitCatalog:
    return cat.OrbitCatalog.from_json(Path(path).read_text())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="orbitlab",
        description="Multiplier-spectrum experiments for hyperbolic polynomial maps.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed override")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.rng_seed = args.seed
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        report = run(args.subcommand, cfg, args.out)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except cat.IncompleteEnumerationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except (cat.ToleranceCollisionError, WindowIdentityError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CHECK

    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']}: {check['detail']}")
    if not report["passed"]:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
