"""Polynomial maps of the complex plane and numerically safe iteration.

Multipliers of long periodic orbits grow like exp(C*n), so derivatives along
orbits are accumulated as running sums of log-moduli and arguments (the
log-polar form) instead of raw complex products.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

# Points beyond this radius are treated as escaped to infinity.  Far beyond
# any Julia set of the normalized maps in scope, well inside double range.
ESCAPE_RADIUS = 1e150

# Radius used when classifying critical orbits: polynomials of degree >= 2
# escape monotonically once they are this large.
_CLASSIFY_ESCAPE = 1e8

TAU = 2.0 * math.pi


class EscapeError(RuntimeError):
    """An orbit left the numerically safe region around the Julia set."""

    def __init__(self, step: int):
        super().__init__(f"escaped at step {step}")
        self.step = step


def wrap_angle(a: float) -> float:
    """Reduce an angle to the principal range (-pi, pi]."""
    r = math.remainder(a, TAU)
    if r <= -math.pi:
        r += TAU
    return r


def wrap_angle_array(a):
    """Vectorized reduction to (-pi, pi]."""
    r = np.remainder(np.asarray(a, dtype=float) + math.pi, TAU) - math.pi
    # remainder() lands in [-pi, pi); move the closed endpoint to +pi
    return np.where(r <= -math.pi, r + TAU, r)


@dataclass(frozen=True)
class LogPolar:
    """log|w| and Arg(w) of a nonzero complex number w.

    The angle is always stored in (-pi, pi].
    """

    log_modulus: float
    angle: float

    def __post_init__(self):
        if not math.isfinite(self.log_modulus):
            raise ValueError("log_modulus must be finite")
        if not math.isfinite(self.angle):
            raise ValueError("angle must be finite")
        object.__setattr__(self, "angle", wrap_angle(self.angle))

    @classmethod
    def from_complex(cls, w: complex) -> "LogPolar":
        if w == 0:
            raise ValueError("zero has no log-polar form")
        return cls(math.log(abs(w)), cmath.phase(w))

    @property
    def modulus(self) -> float:
        return math.exp(self.log_modulus)

    def to_complex(self) -> complex:
        return cmath.rect(self.modulus, self.angle)


def parse_complex(text: str) -> complex:
    """Parse a complex literal like "1.5", "2i", "-0.1+0.7i"."""
    s = text.strip().replace(" ", "").replace("i", "j")
    if not s:
        raise ValueError("empty complex literal")
    try:
        return complex(s)
    except ValueError as e:
        raise ValueError(f"bad complex literal {text!r}") from e


@dataclass(frozen=True)
class RationalMap:
    """A polynomial self-map of C of degree >= 2.

    Coefficients are stored ascending: coeffs[k] multiplies z**k.  The
    "quadratic" kind is the family z -> z**2 + c, which gets a fast
    evaluation path and symbolic inverse branches.
    """

    kind: str
    coeffs: tuple[complex, ...]
    degree: int

    def __post_init__(self):
        if self.degree < 2:
            raise ValueError("degree must be at least 2")
        if len(self.coeffs) != self.degree + 1:
            raise ValueError("coefficient count does not match degree")
        if self.coeffs[-1] == 0:
            raise ValueError("leading coefficient must be nonzero")
        for w in self.coeffs:
            if not (math.isfinite(w.real) and math.isfinite(w.imag)):
                raise ValueError("coefficients must be finite")

    @classmethod
    def quadratic(cls, c: complex) -> "RationalMap":
        c = complex(c)
        return cls("quadratic", (c, 0j, 1 + 0j), 2)

    @classmethod
    def polynomial(cls, coeffs) -> "RationalMap":
        tup = tuple(complex(w) for w in coeffs)
        return cls("polynomial", tup, len(tup) - 1)

    @property
    def c(self) -> complex:
        if self.kind != "quadratic":
            raise AttributeError("c is only defined for the quadratic family")
        return self.coeffs[0]

    def spec_string(self) -> str:
        if self.kind == "quadratic":
            return f"quadratic:{self.c.real!r},{self.c.imag!r}"
        parts = ",".join(f"{w.real!r}+{w.imag!r}i" for w in self.coeffs)
        return "poly:" + parts

    # -- evaluation ---------------------------------------------------

    def evaluate(self, z: complex) -> complex:
        """h(z).  Raises EscapeError if z or h(z) is out of safe range."""
        if abs(z) > ESCAPE_RADIUS:
            raise EscapeError(0)
        w = self._eval_raw(z)
        if abs(w) > ESCAPE_RADIUS:
            raise EscapeError(0)
        return w

    def derivative(self, z: complex) -> complex:
        """h'(z)."""
        return self._deriv_raw(z)

    def _eval_raw(self, z):
        # Horner; works for scalars and numpy arrays alike.
        if self.kind == "quadratic":
            return z * z + self.coeffs[0]
        acc = self.coeffs[-1]
        for w in self.coeffs[-2::-1]:
            acc = acc * z + w
        return acc

    def _deriv_raw(self, z):
        if self.kind == "quadratic":
            return 2.0 * z
        acc = self.degree * self.coeffs[-1]
        for k in range(self.degree - 1, 0, -1):
            acc = acc * z + k * self.coeffs[k]
        return acc

    def critical_points(self) -> tuple[complex, ...]:
        """Finite critical points (roots of h')."""
        if self.kind == "quadratic":
            return (0j,)
        dcoeffs = [k * self.coeffs[k] for k in range(1, self.degree + 1)]
        roots = np.roots(np.asarray(dcoeffs[::-1], dtype=complex))
        ordered = sorted((complex(r) for r in roots), key=lambda w: (w.real, w.imag))
        return tuple(ordered)


def parse_map_spec(spec: str) -> RationalMap:
    """Parse "quadratic:<re>,<im>" or "poly:<c0>,<c1>,...,<cd>"."""
    if ":" not in spec:
        raise ValueError(f"map spec {spec!r} must look like 'quadratic:re,im' or 'poly:c0,...,cd'")
    head, _, body = spec.partition(":")
    head = head.strip().lower()
    if head == "quadratic":
        parts = body.split(",")
        if len(parts) != 2:
            raise ValueError("quadratic spec needs exactly re,im")
        return RationalMap.quadratic(complex(float(parts[0]), float(parts[1])))
    if head == "poly":
        coeffs = [parse_complex(p) for p in body.split(",")]
        if len(coeffs) < 3:
            raise ValueError("poly spec needs degree >= 2 (at least 3 coefficients)")
        return RationalMap.polynomial(coeffs)
    raise ValueError(f"unknown map kind {head!r}")


def iterate_with_derivative(m: RationalMap, z: complex, n: int) -> tuple[complex, LogPolar]:
    """n-th iterate of z together with (h^n)'(z) in log-polar form.

    The derivative is accumulated through the chain rule as a running sum
    of log|h'(z_j)| and arg h'(z_j); the final angle is wrapped to (-pi, pi].
    Raises EscapeError("escaped at step j") if the orbit overflows and
    ValueError if the derivative vanishes along the orbit.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    acc_log = 0.0
    acc_arg = 0.0
    w = complex(z)
    for j in range(n):
        if abs(w) > ESCAPE_RADIUS:
            raise EscapeError(j)
        d = m._deriv_raw(w)
        if d == 0:
            raise ValueError(f"zero derivative at step {j}")
        acc_log += math.log(abs(d))
        acc_arg += cmath.phase(d)
        w = m._eval_raw(w)
    if abs(w) > ESCAPE_RADIUS:
        raise EscapeError(n - 1)
    return w, LogPolar(acc_log, wrap_angle(acc_arg))


@dataclass(frozen=True)
class AttractingCycle:
    """An attracting cycle reached by some critical orbit."""

    period: int
    points: tuple[complex, ...]   # empty when the cycle is at infinity
    multiplier: LogPolar | None   # None when superattracting or at infinity
    superattracting: bool
    at_infinity: bool

    def label(self) -> str:
        if self.at_infinity:
            return "infinity"
        return f"period-{self.period}"


@dataclass(frozen=True)
class HyperbolicityReport:
    """Heuristic certificate that all critical orbits settle on attractors.

    This is a desk check, not a proof: convergence of every critical orbit
    to an attracting cycle (or to infinity) is necessary for hyperbolicity
    and is what downstream enumeration relies on for completeness counts.
    """

    attracting_cycles: tuple[AttractingCycle, ...]
    all_critical_orbits_converged: bool
    iterations_used: int

    def finite_cycles(self) -> tuple[AttractingCycle, ...]:
        return tuple(c for c in self.attracting_cycles if not c.at_infinity)

    def attracting_point_count(self, n: int) -> int:
        """Number of finite attracting periodic points with period dividing n."""
        return sum(c.period for c in self.finite_cycles() if n % c.period == 0)

    def attracting_cycle_count(self, period: int) -> int:
        return sum(1 for c in self.finite_cycles() if c.period == period)


def _polish_cycle(m: RationalMap, z0: complex, q: int, tol: float) -> complex | None:
    """Newton-polish a root of h^q(w) - w starting from z0."""
    w = complex(z0)
    for _ in range(60):
        val = w
        der = 1 + 0j
        try:
            for _ in range(q):
                der *= m._deriv_raw(val)
                val = m._eval_raw(val)
        except OverflowError:
            return None
        g = val - w
        gp = der - 1.0
        if gp == 0:
            return None
        step = g / gp
        w -= step
        if abs(step) < 1e-14 * max(1.0, abs(w)):
            break
        if abs(w) > _CLASSIFY_ESCAPE:
            return None
    val = w
    for _ in range(q):
        val = m._eval_raw(val)
    if abs(val - w) > max(tol, 1e-10):
        return None
    return w


def _cycle_from_orbit(m: RationalMap, z: complex, q_max: int, tol: float):
    """Detect a period <= q_max revisit of z under iteration and polish it."""
    orbit = [complex(z)]
    w = complex(z)
    for _ in range(q_max):
        w = m._eval_raw(w)
        orbit.append(w)
    for q in range(1, q_max + 1):
        if abs(orbit[q] - orbit[0]) < tol:
            root = _polish_cycle(m, orbit[0], q, tol)
            if root is None:
                continue
            # reduce to the primitive period of the polished cycle
            pts = [root]
            v = root
            for _ in range(q - 1):
                v = m._eval_raw(v)
                pts.append(v)
            prim = q
            for d in range(1, q):
                if q % d == 0 and abs(pts[d] - pts[0]) < 1e-8:
                    prim = d
                    break
            return prim, tuple(pts[:prim])
    return None


def classify_hyperbolicity(m: RationalMap, max_iter: int = 4000,
                           cycle_tolerance: float = 1e-9) -> HyperbolicityReport:
    """Iterate every finite critical orbit and report the attractors reached.

    Orbits that neither escape nor settle within max_iter leave the
    converged flag False; nothing is raised.
    """
    if max_iter < 100:
        raise ValueError("max_iter must be at least 100")
    q_max = 64
    detect_tol = 1e-6
    cycles: list[AttractingCycle] = []
    seen_infinity = False
    converged = True
    iters_used = 0

    def register(period, pts):
        for c in cycles:
            if c.at_infinity or c.period != period:
                continue
            if any(abs(c.points[0] - p) < 1e-7 for p in pts):
                return
        sup = False
        mult = None
        try:
            _, mult = iterate_with_derivative(m, pts[0], period)
        except ValueError:
            sup = True  # derivative vanished on the cycle
        except EscapeError:
            return
        if mult is not None and mult.log_modulus >= 0:
            # not attracting after polishing; treat as non-converged evidence
            return
        cycles.append(AttractingCycle(period, pts, mult, sup, False))

    for zc in m.critical_points():
        w = complex(zc)
        settled = False
        for it in range(max_iter):
            if abs(w) > _CLASSIFY_ESCAPE:
                seen_infinity = True
                settled = True
                iters_used = max(iters_used, it)
                break
            if it % q_max == 0 and it > 0:
                found = _cycle_from_orbit(m, w, q_max, detect_tol)
                if found is not None:
                    period, pts = found
                    register(period, pts)
                    settled = True
                    iters_used = max(iters_used, it)
                    break
            try:
                w = m.evaluate(w)
            except EscapeError:
                seen_infinity = True
                settled = True
                iters_used = max(iters_used, it)
                break
        if not settled:
            # final attempt on the late orbit tail
            found = _cycle_from_orbit(m, w, q_max, max(detect_tol, cycle_tolerance))
            if found is not None:
                register(*found)
                settled = True
            iters_used = max(iters_used, max_iter)
        if not settled:
            converged = False

    if seen_infinity:
        cycles.append(AttractingCycle(1, (), None, True, True))
    ordered = tuple(sorted(cycles, key=lambda c: (c.at_infinity, c.period,
                                                  c.points[0].real if c.points else 0.0)))
    return HyperbolicityReport(ordered, converged, iters_used)
