"""Companion matrix of the spatial recurrence, stable/unstable splitting,
and the Lopatinskii determinant with its zeros on the unit circle.

State vectors follow W_j = (w_{j+p-1}, ..., w_{j-r}); an eigenvalue kappa of
M(z) has the Vandermonde eigenvector (kappa^{p+r-1}, ..., kappa, 1).
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import schur, svdvals
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .errors import BranchAmbiguityError, NumericalError, SplittingError
from .output import write_csv
from .scheme import Check, EnvelopeSet, Scheme, in_set_C

SPLIT_TOL = 1e-8
GAP_TOL = 1e-8
VANDERMONDE_GAP = 1e-6
SUBSPACE_TOL = 1e-10
FD_STEP = 1e-5
ROOT_ON_CIRCLE = 1e-10
ROOT_DELTA = 1e-8
SIMPLE_TOL = 1e-3


@dataclass(frozen=True)
class CompanionMatrix:
    z: complex
    entries: np.ndarray
    scheme: Scheme

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def companion(scheme: Scheme, z: complex) -> CompanionMatrix:
    r, p = scheme.r, scheme.p
    n = p + r
    M = np.zeros((n, n), dtype=complex)
    ap = scheme.coef(p)
    for k in range(n):
        ell = p - 1 - k
        M[0, k] = ((z if ell == 0 else 0.0) - scheme.coef(ell)) / ap
    M[1:, :-1] = np.eye(n - 1)
    return CompanionMatrix(complex(z), M, scheme)


def characteristic(scheme: Scheme, z: complex) -> np.ndarray:
    """Coefficients (highest first) of kappa^r (sum_l a_l kappa^l - z)."""
    c = scheme.a[::-1].astype(complex)
    c[scheme.p] -= z
    return c


def dispersion(scheme: Scheme, kappa) -> np.ndarray:
    """P(kappa) = sum_l a_l kappa^l, so that kappa solves z = P(kappa)."""
    kappa = np.asarray(kappa, dtype=complex)
    return sum(scheme.coef(ell) * kappa**ell for ell in range(-scheme.r, scheme.p + 1))


def eigenvalues(M: CompanionMatrix) -> np.ndarray:
    """Eigenvalues of M(z), refined by Newton steps on the characteristic polynomial."""
    kappa = np.linalg.eigvals(M.entries)
    c = characteristic(M.scheme, M.z)
    dc = np.polyder(c)
    for _ in range(3):
        f = np.polyval(c, kappa)
        d = np.polyval(dc, kappa)
        step = np.where(d != 0, f / np.where(d != 0, d, 1), 0)
        trial = kappa - step
        better = np.abs(np.polyval(c, trial)) <= np.abs(f)
        kappa = np.where(better, trial, kappa)
    return kappa


def relation_residual(scheme: Scheme, z: complex, kappa) -> np.ndarray:
    return np.abs(z - dispersion(scheme, kappa))


@dataclass(frozen=True)
class SpectralSplit:
    z: complex
    stable: np.ndarray
    unstable: np.ndarray
    central: np.ndarray
    tol: float

    @property
    def counts(self):
        return len(self.stable), len(self.unstable), len(self.central)

    @property
    def clean(self) -> bool:
        return len(self.central) == 0


def split(M: CompanionMatrix, tol: float = SPLIT_TOL,
          envelope: Optional[EnvelopeSet] = None) -> SpectralSplit:
    """Classify the eigenvalues of M(z) by modulus.

    The (r, p, 0) count is enforced when z is known to avoid C: always for
    |z| > 1, and for any z outside ``envelope`` when one is supplied.
    """
    if not 0 < tol < 0.1:
        raise ValueError("tol must lie in (0, 0.1)")
    scheme, z = M.scheme, M.z
    kappa = eigenvalues(M)
    res = relation_residual(scheme, z, kappa)
    if np.any(res >= 1e-9 * (1 + abs(z))):
        raise NumericalError(f"eigenvalue relation residual {res.max():.2e} at z = {z}")
    mod = np.abs(kappa)
    order = np.lexsort((np.angle(kappa), mod))
    kappa, mod = kappa[order], mod[order]
    out = SpectralSplit(z, kappa[mod < 1 - tol], kappa[mod > 1 + tol],
                        kappa[np.abs(mod - 1) <= tol], tol)
    outside = abs(z) > 1 or (envelope is not None and not in_set_C(envelope, z))
    if outside and out.counts != (scheme.r, scheme.p, 0):
        raise SplittingError(f"z = {z} outside C but split counts are {out.counts}, "
                             f"expected ({scheme.r}, {scheme.p}, 0)")
    return out


def critical_values(scheme: Scheme) -> np.ndarray:
    """Branch points P(kappa*) where P'(kappa*) = 0 and eigenvalues can collide."""
    ell = scheme.offsets
    coeffs = (ell * scheme.a)[::-1]  # kappa^{r+1} P'(kappa) up to a power of kappa
    crit = np.roots(coeffs) if np.count_nonzero(coeffs) > 1 else np.array([])
    crit = crit[np.abs(crit) > 1e-12]
    return dispersion(scheme, crit)


def _gap_at_one(scheme: Scheme) -> float:
    kappa = eigenvalues(companion(scheme, 1.0))
    others = np.delete(kappa, np.argmin(np.abs(kappa - 1)))
    return float(np.min(np.abs(np.abs(others) - 1))) if others.size else 1.0


def branch_radius(scheme: Scheme) -> float:
    """Size of the disk around z = 1 on which the kappa branch is tracked.

    0.2 min(1, gap) where gap separates |kappa| = 1 from the other moduli at
    z = 1, further capped at half the distance from 1 to the nearest branch
    point so the branch stays single valued.
    """
    return _branch_radius_key((scheme.r, scheme.p, tuple(scheme.a), scheme.lambda_a))


@lru_cache(maxsize=64)
def _branch_radius_key(key) -> float:
    r, p, a, lambda_a = key
    scheme = Scheme(r, p, a, lambda_a, 1, np.zeros((r, 1)))
    radius = 0.2 * min(1.0, _gap_at_one(scheme))
    crit = critical_values(scheme)
    if crit.size:
        radius = min(radius, 0.5 * float(np.min(np.abs(crit - 1))))
    return radius


def kappa_branch(scheme: Scheme, z: complex, radius: Optional[float] = None) -> complex:
    """Eigenvalue of M(z) continuing kappa(1) = 1, picked against 1 - (z-1)/lambda_a."""
    radius = branch_radius(scheme) if radius is None else radius
    if abs(z - 1) >= radius:
        raise BranchAmbiguityError(f"|z - 1| = {abs(z - 1):.3g} exceeds the branch radius {radius:.3g}")
    kappa = eigenvalues(companion(scheme, z))
    guess = 1 - (z - 1) / scheme.lambda_a
    dist = np.abs(kappa - guess)
    order = np.argsort(dist)
    if kappa.size > 1 and dist[order[1]] < 1e-8:
        raise BranchAmbiguityError(f"two eigenvalues within 1e-8 of the branch prediction at z = {z}")
    return complex(kappa[order[0]])


# --------------------------------------------------------------------------
# stable subspace


@dataclass(frozen=True)
class StableBasis:
    z: complex
    columns: np.ndarray
    eigenvalues: np.ndarray
    includes_kappa_branch: bool
    kind: str  # "vandermonde" or "schur"


def vandermonde(kappa: Sequence[complex], size: int) -> np.ndarray:
    powers = np.arange(size - 1, -1, -1)
    return np.asarray(kappa, dtype=complex)[None, :] ** powers[:, None]


def _match(reference: np.ndarray, values: np.ndarray) -> np.ndarray:
    cost = np.abs(reference[:, None] - values[None, :])
    _, cols = linear_sum_assignment(cost)
    return values[cols]


def _select_stable(scheme: Scheme, z: complex, kappa: np.ndarray, radius: float):
    r = scheme.r
    mod = np.abs(kappa)
    if abs(z - 1) < radius:
        kb = kappa_branch(scheme, z, radius)
        ib = int(np.argmin(np.abs(kappa - kb)))
        rest = np.delete(kappa, ib)
        rest = rest[np.argsort(np.abs(rest))]
        if r > 1 and abs(rest[r - 2]) > 1 - GAP_TOL:
            raise SplittingError(f"strongly stable eigenvalues reach the circle at z = {z}")
        return np.concatenate((rest[: r - 1], [kappa[ib]])), True
    order = np.argsort(mod, kind="stable")
    if mod[order[r]] - mod[order[r - 1]] < GAP_TOL:
        raise SplittingError(f"modulus gap {mod[order[r]] - mod[order[r - 1]]:.2e} "
                             f"between stable and unstable eigenvalues at z = {z}")
    return kappa[order[:r]], False


def _subspace_residual(M: np.ndarray, V: np.ndarray) -> float:
    Q, _ = np.linalg.qr(V)
    R = M @ Q - Q @ (Q.conj().T @ M @ Q)
    return float(np.linalg.norm(R, 2) / max(1.0, np.linalg.norm(M, 2)))


def stable_basis(scheme: Scheme, z: complex, reference: Optional[np.ndarray] = None,
                 kind: str = "auto", radius: Optional[float] = None) -> StableBasis:
    """Basis of E^s(z), continued through the kappa branch near z = 1.

    Vandermonde columns are ordered by modulus then argument, or matched to
    ``reference`` eigenvalues so that Delta stays holomorphic between nearby
    evaluations.  Clustered eigenvalues switch to ordered Schur vectors.
    """
    radius = branch_radius(scheme) if radius is None else radius
    M = companion(scheme, z)
    kappa = eigenvalues(M)
    chosen, with_branch = _select_stable(scheme, z, kappa, radius)
    if reference is not None:
        chosen = _match(np.asarray(reference), chosen)
    else:
        chosen = chosen[np.lexsort((np.angle(chosen), np.abs(chosen)))]
    n = scheme.p + scheme.r
    clustered = chosen.size > 1 and np.min(
        np.abs(chosen[:, None] - chosen[None, :])[~np.eye(chosen.size, dtype=bool)]) < VANDERMONDE_GAP
    if kind == "schur" or (kind == "auto" and clustered):
        V = schur_stable_columns(M.entries, chosen)
        used = "schur"
    else:
        V = vandermonde(chosen, n)
        used = "vandermonde"
    normed = V / np.linalg.norm(V, axis=0)
    if svdvals(normed).min() <= 1e-10:
        if used == "schur":
            raise SplittingError(f"stable basis is rank deficient at z = {z}")
        V = schur_stable_columns(M.entries, chosen)
        used = "schur"
    res = _subspace_residual(M.entries, V)
    if res >= SUBSPACE_TOL:
        raise NumericalError(f"stable subspace residual {res:.2e} at z = {z}")
    return StableBasis(complex(z), V, chosen, with_branch, used)


def schur_stable_columns(M: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the invariant subspace for ``chosen`` eigenvalues."""
    all_k = np.linalg.eigvals(M)
    # Mark eigenvalues of M that are nearest to one of the chosen ones.
    picked = np.zeros(all_k.size, dtype=bool)
    for c in chosen:
        d = np.abs(all_k - c)
        d[picked] = np.inf
        picked[int(np.argmin(d))] = True
    keep = all_k[picked]
    cut = 0.5 * min((np.min(np.abs(all_k[~picked][:, None] - keep[None, :])) if (~picked).any() else 1.0), 1.0)

    def select(x):
        return bool(np.min(np.abs(keep - x)) < cut)

    T, Z, sdim = schur(M, output="complex", sort=select)
    if sdim != chosen.size:
        raise SplittingError(f"ordered Schur selected {sdim} eigenvalues, expected {chosen.size}")
    return Z[:, :sdim]


def unstable_columns(scheme: Scheme, z: complex, basis: StableBasis) -> np.ndarray:
    """Basis of the complementary invariant subspace (the p remaining eigenvalues)."""
    M = companion(scheme, z)
    kappa = eigenvalues(M)
    rest = kappa.copy()
    for c in basis.eigenvalues:
        rest = np.delete(rest, int(np.argmin(np.abs(rest - c))))
    n = scheme.p + scheme.r
    gaps = np.abs(rest[:, None] - rest[None, :])[~np.eye(rest.size, dtype=bool)]
    if rest.size > 1 and gaps.min() < VANDERMONDE_GAP:
        return schur_stable_columns(M.entries, rest)
    return vandermonde(rest, n)


# --------------------------------------------------------------------------
# boundary matrix and Lopatinskii determinant


def boundary_matrix(scheme: Scheme) -> np.ndarray:
    """r x (p+r) matrix acting on W_1; row i encodes the ghost nu = -i."""
    r, p = scheme.r, scheme.p
    B = np.zeros((r, p + r))
    for i in range(r):
        nu = -i
        B[i, p + i] = 1.0
        for ell in range(1, scheme.p_b + 1):
            B[i, p - ell] = -scheme.b_row(nu)[ell - 1]
    return B


def lopatinskii(scheme: Scheme, z: complex, reference: Optional[np.ndarray] = None,
                kind: str = "auto", radius: Optional[float] = None) -> complex:
    basis = stable_basis(scheme, z, reference, kind, radius)
    return complex(np.linalg.det(boundary_matrix(scheme) @ basis.columns))


def lopatinskii_derivative(scheme: Scheme, z: complex, h: float = FD_STEP,
                           reference: Optional[np.ndarray] = None) -> complex:
    """Five-point central difference of Delta with the column order frozen at z."""
    if reference is None:
        reference = stable_basis(scheme, z).eigenvalues
    f = [lopatinskii(scheme, z + k * h, reference, kind="vandermonde") for k in (-2, -1, 1, 2)]
    return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)


def boundary_sigma_min(scheme: Scheme, z: complex) -> float:
    """Smallest singular value of B on an orthonormal basis of E^s(z), relative to |B|."""
    basis = stable_basis(scheme, z, kind="schur")
    B = boundary_matrix(scheme)
    return float(svdvals(B @ basis.columns).min() / np.linalg.norm(B, 2))


@dataclass(frozen=True)
class LopatinskiiRoot:
    z: complex
    theta: float
    delta_abs: float
    dprime_abs: float
    simple: bool
    dprime: complex = 0j
    method: str = "vandermonde"


def _refine_newton(scheme: Scheme, z0: complex, max_iter: int = 60):
    reference = stable_basis(scheme, z0).eigenvalues
    z = complex(z0)
    for _ in range(max_iter):
        f = lopatinskii(scheme, z, reference, kind="vandermonde")
        d = lopatinskii_derivative(scheme, z, reference=reference)
        if d == 0:
            break
        step = f / d
        if abs(step) > 0.1:
            step *= 0.1 / abs(step)
        z -= step
        reference = _match(reference, stable_basis(scheme, z).eigenvalues)
        if abs(step) < 1e-15:
            break
    return z, reference


def _local_minima(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    left = np.roll(values, 1)
    right = np.roll(values, -1)
    return np.flatnonzero(valid & (values <= left) & (values < right))


def find_roots(scheme: Scheme, n_theta: int = 4096, tol: float = ROOT_DELTA,
               basis: str = "vandermonde") -> List[LopatinskiiRoot]:
    """Zeros of Delta on the unit circle away from z = 1.

    ``basis="vandermonde"`` refines scan minima by complex Newton in z;
    ``basis="schur"`` minimises the smallest singular value of B restricted
    to an orthonormal stable basis along the circle, an independent route
    that never evaluates Delta itself.
    """
    if n_theta < 2048:
        raise ValueError("n_theta must be at least 2048")
    radius = branch_radius(scheme)
    theta = np.linspace(-np.pi, np.pi, n_theta, endpoint=False)
    valid = np.abs(theta) >= radius
    if basis == "schur":
        prof = np.array([boundary_sigma_min(scheme, np.exp(1j * t)) if v else np.inf
                         for t, v in zip(theta, valid)])
    else:
        prof = np.array([abs(lopatinskii(scheme, np.exp(1j * t))) if v else np.inf
                         for t, v in zip(theta, valid)])
    step = theta[1] - theta[0]
    roots: List[LopatinskiiRoot] = []
    for i in _local_minima(prof, valid & np.isfinite(prof)):
        root = (_refine_schur(scheme, theta[i], step, radius) if basis == "schur"
                else _refine_vandermonde(scheme, theta[i], tol))
        if root is None or abs(root.theta) < radius:
            continue
        if any(abs(root.z - q.z) < 1e-8 for q in roots):
            continue
        roots.append(root)
    roots.sort(key=lambda q: q.theta)
    return roots


def _refine_vandermonde(scheme: Scheme, theta0: float, tol: float) -> Optional[LopatinskiiRoot]:
    try:
        z, reference = _refine_newton(scheme, np.exp(1j * theta0))
        if abs(abs(z) - 1) >= ROOT_ON_CIRCLE:
            return None
        delta = lopatinskii(scheme, z, reference, kind="vandermonde")
        if abs(delta) >= tol:
            return None
        d = lopatinskii_derivative(scheme, z, reference=reference)
    except (NumericalError, np.linalg.LinAlgError):
        return None
    theta = math.atan2(z.imag, z.real)
    return LopatinskiiRoot(complex(z), theta, abs(delta), abs(d), abs(d) > SIMPLE_TOL, d)


def _refine_schur(scheme: Scheme, theta0: float, step: float, radius: float) -> Optional[LopatinskiiRoot]:
    def f(t):
        return boundary_sigma_min(scheme, np.exp(1j * t))

    res = minimize_scalar(f, bounds=(theta0 - 2 * step, theta0 + 2 * step), method="bounded",
                          options={"xatol": 1e-13, "maxiter": 500})
    t = math.remainder(float(res.x), 2 * math.pi)
    if res.fun >= ROOT_DELTA:
        return None
    h = 1e-6
    slope = 0.5 * (f(t + h) + f(t - h) - 2 * res.fun) / h
    return LopatinskiiRoot(complex(np.exp(1j * t)), t, float(res.fun), float(slope), bool(slope > SIMPLE_TOL),
                           method="schur")


# --------------------------------------------------------------------------
# boundary condition report


@dataclass
class BoundaryReport:
    checks: List[Check] = field(default_factory=list)
    roots: List[LopatinskiiRoot] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def check_boundary(scheme: Scheme, n_theta: int = 4096,
                      radii: Sequence[float] = (1.001, 1.01, 1.1, 1.5, 3.0)) -> BoundaryReport:
    """Isomorphism of B on the extended stable space at 1, simple circle zeros,
    and no zero of Delta in the sampled exterior of the disk."""
    report = BoundaryReport()
    s1 = boundary_sigma_min(scheme, 1.0)
    report.checks.append(Check("boundary-at-one", s1 > 1e-8, s1,
                               "smallest singular value of B on E^s(1)"))
    roots = find_roots(scheme, n_theta)
    report.roots = roots
    bad = [q for q in roots if not q.simple]
    report.checks.append(Check("simple-roots", not bad,
                               min((q.dprime_abs for q in roots), default=float("inf")),
                               f"{len(roots)} root(s) on the circle, {len(bad)} not simple"))
    theta = np.linspace(-np.pi, np.pi, 256, endpoint=False)
    worst = min(boundary_sigma_min(scheme, rad * np.exp(1j * t)) for rad in radii for t in theta)
    report.checks.append(Check("exterior", worst > 1e-6, worst,
                               "min smallest singular value of B|E^s over sampled |z| > 1"))
    return report


# --------------------------------------------------------------------------
# CSV emitters


def write_eigenvalue_cloud(scheme: Scheme, path, zs: Optional[Sequence[complex]] = None,
                           tol: float = SPLIT_TOL) -> str:
    if zs is None:
        zs = np.exp(1j * np.linspace(-np.pi, np.pi, 256, endpoint=False))
    rows = []
    for z in zs:
        s = split(companion(scheme, z), tol)
        for label, group in (("stable", s.stable), ("unstable", s.unstable), ("central", s.central)):
            for k in group:
                rows.append((z.real, z.imag, k.real, k.imag, label))
    return write_csv(path, ("z_re", "z_im", "kappa_re", "kappa_im", "class"), rows)


def lopatinskii_profile(scheme: Scheme, n_theta: int = 4096):
    radius = branch_radius(scheme)
    theta = np.linspace(-np.pi, np.pi, n_theta, endpoint=False)
    theta = theta[np.abs(theta) >= radius]
    values = np.array([abs(lopatinskii(scheme, np.exp(1j * t))) for t in theta])
    return theta, values


def write_lopatinskii_profile(scheme: Scheme, path, n_theta: int = 4096) -> str:
    theta, values = lopatinskii_profile(scheme, n_theta)
    return write_csv(path, ("theta", "abs_delta"), zip(theta, values))
