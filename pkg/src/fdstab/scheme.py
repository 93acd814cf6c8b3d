"""Explicit one-step half-line schemes and checks on their amplification factor.

A scheme advances interior values j >= 1 with the stencil ``a`` (indexed
l = -r..p) and refills the r ghost cells nu = 1-r..0 from the first p_b
interior values through the rows of ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import yaml
from numpy.polynomial import Polynomial
from numpy.polynomial import chebyshev as cheb

from .errors import AssumptionError
from .output import write_csv

ZERO_TOL = 1e-14
CONSISTENCY_TOL = 1e-12
FIT_THETA = (1e-4, 1e-1)
FIT_POINTS = 64
ORDER_TOL = 0.1


@dataclass(frozen=True)
class Scheme:
    r: int
    p: int
    a: np.ndarray
    lambda_a: float
    p_b: int
    b: np.ndarray
    name: str = ""

    def __post_init__(self):
        # Coerce only; structural problems are reported by validate().
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).ravel())
        b = np.asarray(self.b, dtype=float)
        if b.ndim < 2:
            b = b.reshape(max(int(self.r), 1), -1) if b.size else np.zeros((max(int(self.r), 1), 0))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lambda_a", float(self.lambda_a))

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.r, self.p + 1)

    def coef(self, ell: int) -> float:
        """a_l for l in [-r, p]."""
        return float(self.a[ell + self.r])

    def b_row(self, nu: int) -> np.ndarray:
        """Extrapolation weights b_{1..p_b, nu} for the ghost nu in [1-r, 0]."""
        return self.b[nu + self.r - 1]

    def with_boundary(self, b, name: Optional[str] = None) -> "Scheme":
        b = np.asarray(b, dtype=float).reshape(self.r, -1)
        return Scheme(self.r, self.p, self.a.copy(), self.lambda_a, b.shape[1], b,
                      self.name if name is None else name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "r": int(self.r),
            "p": int(self.p),
            "lambda_a": float(self.lambda_a),
            "a": [float(x) for x in self.a],
            "p_b": int(self.p_b),
            "b": [[float(x) for x in row] for row in self.b],
        }


def lax_friedrichs(lambda_a: float, D: float, b: float = 0.0, name: str = "") -> Scheme:
    """Lax-Friedrichs type scheme with numerical viscosity D and u_0 = b u_1."""
    a = ((D + lambda_a) / 2, 1 - D, (D - lambda_a) / 2)
    return Scheme(1, 1, a, lambda_a, 1, [[b]], name or "lax-friedrichs")


def lax_wendroff(lambda_a: float, b: float = 0.0, name: str = "") -> Scheme:
    al = lambda_a
    a = ((al * al + al) / 2, 1 - al * al, (al * al - al) / 2)
    return Scheme(1, 1, a, lambda_a, 1, [[b]], name or "lax-wendroff")


def scheme_from_dict(data: dict) -> Scheme:
    missing = [k for k in ("r", "p", "lambda_a", "a", "p_b", "b") if k not in data]
    if missing:
        raise AssumptionError("scheme config is missing keys: " + ", ".join(missing))
    r = int(data["r"])
    b = np.asarray(data["b"], dtype=float)
    if b.ndim == 1:
        b = b.reshape(r, -1)
    return Scheme(r, int(data["p"]), data["a"], float(data["lambda_a"]),
                  int(data["p_b"]), b, str(data.get("name", "")))


def load_scheme(path) -> Scheme:
    # YAML is a superset of JSON, so one loader covers both formats.
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise AssumptionError(f"{path}: expected a mapping of scheme keys")
    return scheme_from_dict(data)


def save_scheme(scheme: Scheme, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scheme.to_dict(), fh, sort_keys=False)


# --------------------------------------------------------------------------
# amplification factor


def symbol(scheme: Scheme, theta):
    """F(theta) = sum_l a_l exp(i l theta); accepts scalars or arrays."""
    theta = np.asarray(theta, dtype=float)
    out = np.exp(1j * np.multiply.outer(theta, scheme.offsets)) @ scheme.a
    return complex(out) if out.ndim == 0 else out


def damping_polynomial(scheme: Scheme) -> Polynomial:
    """1 - |F|^2 as a polynomial in s = sin^2(theta/2).

    |F|^2 is a cosine series in the autocorrelation of ``a``; rewriting
    cos(k theta) = T_k(1 - 2 s) removes the cancellation that makes
    1 - |F| useless near theta = 0 when evaluated directly.
    """
    a = scheme.a
    n = len(a)
    c = np.array([a[: n - k] @ a[k:] for k in range(n)])
    series = np.concatenate(([c[0]], 2 * c[1:]))
    in_x = Polynomial(cheb.cheb2poly(series))
    in_s = in_x(Polynomial([1.0, -2.0]))
    d = -in_s.coef
    d[0] += 1.0
    d[np.abs(d) < ZERO_TOL] = 0.0
    return Polynomial(d)


def damping(scheme: Scheme, theta) -> np.ndarray:
    """1 - |F(theta)|^2 without cancellation."""
    s = np.sin(np.asarray(theta, dtype=float) / 2) ** 2
    return damping_polynomial(scheme)(s)


def log_modulus_deficit(scheme: Scheme, theta) -> np.ndarray:
    """g(theta) = -log|F(theta)|, accurate for small theta."""
    return -0.5 * np.log1p(-damping(scheme, theta))


def phase_residual(scheme: Scheme, theta) -> np.ndarray:
    """h(theta) = -arg F(theta) - lambda_a theta (principal branch)."""
    theta = np.asarray(theta, dtype=float)
    return -np.angle(symbol(scheme, theta)) - scheme.lambda_a * theta


# --------------------------------------------------------------------------
# dissipation


@dataclass(frozen=True)
class DissipationFit:
    mu: int
    beta: float
    fit_residual: float  # K with |F - exp(-i alpha t - beta t^2mu)| <= K t^(2mu+1) on the window
    theta_window: float
    slope: float = float("nan")
    phase_order: float = float("inf")  # leading power of the phase residual h

    def expansion(self, alpha: float, theta):
        theta = np.asarray(theta, dtype=float)
        return np.exp(-1j * alpha * theta - self.beta * theta ** (2 * self.mu))


def _loglog_slope(theta: np.ndarray, values: np.ndarray) -> float:
    return float(np.polyfit(np.log(theta), np.log(values), 1)[0])


def fit_dissipation(scheme: Scheme) -> DissipationFit:
    """Leading order 2 mu and coefficient beta of -log|F| near theta = 0."""
    theta = np.geomspace(*FIT_THETA, FIT_POINTS)
    g = log_modulus_deficit(scheme, theta)
    if np.all(g == 0.0):
        raise AssumptionError("dissipation-fit: |F| = 1 on the whole fit window, beta <= 0")
    nz = g != 0.0
    slope = _loglog_slope(theta[nz], np.abs(g[nz]))
    order = int(round(slope))
    if abs(slope - order) > ORDER_TOL:
        raise AssumptionError(f"dissipation-fit: leading order {slope:.3f} is not an integer")
    if order <= 0 or order % 2:
        raise AssumptionError(f"dissipation-fit: leading order {order} is not a positive even integer")
    mu = order // 2
    # g is even in theta for real coefficients: g / t^2mu = beta + gamma t^2 + delta t^4
    design = np.stack([np.ones_like(theta), theta**2, theta**4], axis=1)
    coeffs, *_ = np.linalg.lstsq(design, g / theta ** (2 * mu), rcond=None)
    beta = float(coeffs[0])
    if not beta > 0:
        raise AssumptionError(f"dissipation-fit: beta = {beta:.3e} <= 0 (not dissipative near 0)")
    F = symbol(scheme, theta)
    approx = np.exp(-1j * scheme.lambda_a * theta - beta * theta ** (2 * mu))
    K = float(np.max(np.abs(F - approx) / theta ** (2 * mu + 1)))
    if not math.isfinite(K):
        raise AssumptionError("dissipation-fit: non-finite fit residual")
    h = np.abs(phase_residual(scheme, theta))
    above = h > 1e-13 * theta
    phase_order = _loglog_slope(theta[above], h[above]) if above.sum() >= 8 else float("inf")
    return DissipationFit(mu, beta, K, FIT_THETA[1], slope, phase_order)


def check_dissipativity(scheme: Scheme, n_samples: int = 4096,
                        window: float = FIT_THETA[1]) -> Tuple[bool, float]:
    """|F| < 1 away from 0 on a uniform grid; near 0 through 1 - |F|^2 > 0.

    Returns the pass flag and delta0 = 1 - max |F| over the grid points with
    |theta| >= window.
    """
    if n_samples < 1024:
        raise ValueError("n_samples must be at least 1024")
    theta = np.linspace(-np.pi, np.pi, n_samples, endpoint=False)
    outer = theta[np.abs(theta) >= window]
    modulus = np.abs(symbol(scheme, outer))
    delta0 = float(1.0 - modulus.max())
    inner = np.concatenate((np.geomspace(1e-6, window, 256), np.linspace(0, window, 257)[1:]))
    near_ok = bool(np.all(damping(scheme, inner) > 0))
    return bool(delta0 > 0 and near_ok), delta0


# --------------------------------------------------------------------------
# envelope set C


@dataclass(frozen=True)
class EnvelopeSet:
    c0: float  # sharp value against the sampled curve
    theta0: float
    delta0: float  # 1 - max |F| on theta0 <= |theta| <= pi
    mu: int
    c0_proof: float  # conservative value with c0_proof * pi^2mu <= delta0

    @property
    def c0_bound(self) -> float:
        return self.delta0 / math.pi ** (2 * self.mu)


def _polar_curve(scheme: Scheme, theta: np.ndarray):
    F = symbol(scheme, theta)
    rho = np.abs(F)
    one_minus_rho = damping(scheme, theta) / (1 + rho)
    return rho, one_minus_rho, np.angle(F)


def envelope_c0(scheme: Scheme, fit: DissipationFit, n_samples: int = 4096) -> EnvelopeSet:
    """Largest c0 with rho(theta) <= 1 - c0 phi(theta)^2mu on the sampled curve.

    The optimum against a finite grid is an exact minimum of
    (1 - rho) / |phi|^2mu, so no bisection is needed.  The conservative
    value follows the two-zone construction: near 0 the curve obeys
    1 - rho >= beta/2 t^2mu and |phi| <= 3 alpha/2 |t|, away from 0 it is
    bounded by 1 - delta0.
    """
    mu, alpha = fit.mu, scheme.lambda_a
    theta = np.linspace(-np.pi, np.pi, n_samples + 1)
    theta = theta[theta != 0.0]
    rho, gap, phi = _polar_curve(scheme, theta)
    if np.any(gap <= 0):
        raise AssumptionError("envelope: |F| >= 1 at a sampled theta != 0, no c0 > 0 exists")
    ratios = gap / np.abs(phi) ** (2 * mu)
    c0 = float(np.min(ratios[np.abs(phi) > 0]))
    if not c0 > 0:
        raise AssumptionError("envelope: no positive c0")

    # theta0: largest grid radius on which the near-zero estimates hold
    t = np.linspace(0, np.pi, n_samples + 1)[1:]
    _, gap_t, phi_t = _polar_curve(scheme, t)
    ok = ((gap_t >= 0.5 * fit.beta * t ** (2 * mu))
          & (np.abs(phi_t) >= 0.5 * alpha * t)
          & (np.abs(phi_t) <= 1.5 * alpha * t))
    bad = np.flatnonzero(~ok)
    theta0 = float(t[bad[0] - 1]) if bad.size and bad[0] > 0 else float(t[-1] if not bad.size else t[0])
    outer = np.abs(theta) >= theta0
    delta0 = float(1.0 - rho[outer].max()) if outer.any() else float(gap.min())
    c0_proof = min(delta0 / math.pi ** (2 * mu), 0.5 * fit.beta / (1.5 * alpha) ** (2 * mu))
    return EnvelopeSet(c0, theta0, delta0, mu, float(min(c0_proof, c0)))


def in_set_C(env: EnvelopeSet, z: complex, conservative: bool = False, atol: float = 1e-12) -> bool:
    """Polar membership test rho <= 1 - c0 |phi|^2mu, phi in [-pi, pi]."""
    c0 = env.c0_proof if conservative else env.c0
    rho, phi = abs(z), math.atan2(complex(z).imag, complex(z).real)
    return rho <= 1.0 - c0 * abs(phi) ** (2 * env.mu) + atol


# --------------------------------------------------------------------------
# validation report


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""
    hard: bool = False

    def to_dict(self) -> dict:
        return {"check": self.name, "passed": self.passed, "margin": self.margin,
                "detail": self.detail, "hard": self.hard}


@dataclass
class ValidationReport:
    scheme: Scheme
    checks: List[Check] = field(default_factory=list)
    fit: Optional[DissipationFit] = None
    envelope: Optional[EnvelopeSet] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> List[str]:
        return [c.name for c in self.checks]


def structure_problems(scheme: Scheme) -> List[str]:
    out = []
    r, p, p_b = scheme.r, scheme.p, scheme.p_b
    if min(r, p) < 1:
        out.append(f"widths must be positive (r={r}, p={p})")
        return out
    if scheme.a.size != r + p + 1:
        out.append(f"a has {scheme.a.size} entries, expected r+p+1 = {r + p + 1}")
        return out
    if abs(scheme.a[0]) <= ZERO_TOL:
        out.append("a_{-r} = 0")
    if abs(scheme.a[-1]) <= ZERO_TOL:
        out.append("a_p = 0")
    if p_b < 1 or p_b > p:
        out.append(f"p_b = {p_b} must satisfy 1 <= p_b <= p = {p}")
    if scheme.b.shape != (r, p_b):
        out.append(f"b has shape {scheme.b.shape}, expected (r, p_b) = ({r}, {p_b})")
    if not scheme.lambda_a > 0:
        out.append(f"lambda_a = {scheme.lambda_a} must be positive")
    if not np.all(np.isfinite(scheme.a)) or not np.all(np.isfinite(scheme.b)):
        out.append("non-finite coefficients")
    return out


def validate(scheme: Scheme, n_samples: int = 4096) -> ValidationReport:
    report = ValidationReport(scheme)
    add = report.checks.append
    problems = structure_problems(scheme)
    add(Check("structure", not problems, float(len(problems)), "; ".join(problems), hard=bool(problems)))
    if problems:
        return report
    ell = scheme.offsets
    total = float(scheme.a.sum())
    drift = float(ell @ scheme.a)
    add(Check("consistency-sum", abs(total - 1) < CONSISTENCY_TOL, abs(total - 1),
              f"sum a = {total!r}"))
    add(Check("consistency-drift", abs(drift + scheme.lambda_a) < CONSISTENCY_TOL,
              abs(drift + scheme.lambda_a), f"sum l a_l = {drift!r}"))
    add(Check("bernstein", scheme.lambda_a < scheme.r, scheme.r - scheme.lambda_a,
              f"lambda_a = {scheme.lambda_a!r} vs r = {scheme.r}"))
    ok, delta0 = check_dissipativity(scheme, n_samples)
    add(Check("dissipativity", ok, delta0, f"1 - max|F| = {delta0:.6g} away from 0"))
    try:
        fit = fit_dissipation(scheme)
    except AssumptionError as exc:
        add(Check("dissipation-fit", False, float("nan"), str(exc)))
        return report
    report.fit = fit
    add(Check("dissipation-fit", True, fit.beta, f"mu = {fit.mu}, beta = {fit.beta:.6g}"))
    need = 2 * fit.mu + 1
    add(Check("dissipation-expansion", fit.phase_order >= need - ORDER_TOL,
              fit.phase_order - need,
              f"phase error is O(theta^{fit.phase_order:.2f}); expansion needs O(theta^{need})"))
    if ok:
        try:
            report.envelope = envelope_c0(scheme, fit, n_samples)
        except AssumptionError as exc:
            add(Check("envelope", False, float("nan"), str(exc)))
    return report


def require_valid(scheme: Scheme, allow: Tuple[str, ...] = ()) -> ValidationReport:
    """Raise AssumptionError naming the first failed check not listed in ``allow``."""
    report = validate(scheme)
    for c in report.failures:
        if c.name not in allow:
            raise AssumptionError(f"{c.name}: {c.detail}")
    return report


def write_spectrum_csv(scheme: Scheme, path, n_samples: int = 1024) -> str:
    theta = np.linspace(-np.pi, np.pi, n_samples + 1)
    F = symbol(scheme, theta)
    rows = zip(theta, F.real, F.imag, np.abs(F))
    return write_csv(path, ("theta", "re", "im", "modulus"), rows)
