"""Spatial Green's function G_z(., j0) of (z - T) on the half-line.

Two independent constructions are provided: a truncated banded solve and
the stable/unstable projector recurrence of the companion matrix.  Residues
at Lopatinskii roots (surface waves) are obtained by contour quadrature and
by a closed form, and the two must agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import svdvals
from scipy.sparse.linalg import LinearOperator, onenormest, splu

from .errors import NumericalError, SingularBoundaryError, WindowError
from .output import write_csv
from .scheme import Scheme
from .spectral import (
    LopatinskiiRoot,
    boundary_matrix,
    companion,
    lopatinskii_derivative,
    stable_basis,
    unstable_columns,
)

COND_LIMIT = 1e12
EDGE_TOL = 1e-12
MAX_WINDOW = 1 << 17
RESIDUE_RADIUS = 1e-3
RESIDUE_NODES = 64
RESIDUE_ABORT = 1e-6


@dataclass(frozen=True)
class SpatialGreenField:
    z: complex
    j0: int
    j: np.ndarray  # indices 1-r .. J
    values: np.ndarray
    J: int
    edge: float = 0.0
    cond: float = float("nan")
    method: str = ""

    def at(self, j) -> np.ndarray:
        return self.values[np.asarray(j) - self.j[0]]

    def window(self, j_max: int) -> np.ndarray:
        return self.values[: j_max - self.j[0] + 1]


def equation_residuals(scheme: Scheme, z: complex, values: np.ndarray,
                       j0: Optional[int] = None, margin: Optional[int] = None):
    """Residuals of the boundary rows and of (z - T) w = delta_{j0} on the interior.

    ``values`` holds w_{1-r}, ..., w_J.  Interior rows within ``margin``
    (default p) of the right edge are skipped since they see the closure.
    """
    r, p = scheme.r, scheme.p
    w = np.asarray(values)
    J = w.size - r
    w = np.concatenate((w, np.zeros(p, dtype=w.dtype)))  # zero closure beyond J
    bc = []
    for nu in range(1 - r, 1):
        bc.append(w[nu + r - 1] - scheme.b_row(nu) @ w[r: r + scheme.p_b])
    margin = p if margin is None else margin
    rows = np.arange(1, J - margin + 1)
    Tw = np.zeros(rows.size, dtype=complex)
    for ell in range(-r, p + 1):
        Tw += scheme.coef(ell) * w[rows + ell + r - 1]
    res = z * w[rows + r - 1] - Tw
    if j0 is not None and 1 <= j0 <= rows[-1]:
        res[j0 - 1] -= 1.0
    return np.abs(np.asarray(bc)), np.abs(res)


def _assemble(scheme: Scheme, z: complex, J: int) -> sp.csc_matrix:
    r, p = scheme.r, scheme.p
    n = J + r
    rows, cols, vals = [], [], []
    for nu in range(1 - r, 1):
        i = nu + r - 1
        rows.append(i), cols.append(i), vals.append(1.0)
        for ell in range(1, scheme.p_b + 1):
            rows.append(i), cols.append(ell + r - 1), vals.append(-scheme.b_row(nu)[ell - 1])
    for j in range(1, J + 1):
        i = j + r - 1
        for ell in range(-r, p + 1):
            m = j + ell
            if m > J:
                continue  # homogeneous Dirichlet closure
            coef = -scheme.coef(ell) + (z if ell == 0 else 0.0)
            rows.append(i), cols.append(m + r - 1), vals.append(coef)
    return sp.csc_matrix((np.asarray(vals, dtype=complex), (rows, cols)), shape=(n, n))


def _condition(A: sp.csc_matrix, lu) -> float:
    n = A.shape[0]
    inv = LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="H"),
                         dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return float(onenormest(A) * onenormest(inv))


def spatial_green_direct(scheme: Scheme, z: complex, j0: int, J: Optional[int] = None,
                         auto_grow: bool = True) -> SpatialGreenField:
    """Banded solve of (z - T) G = delta_{j0} with G = 0 beyond the window."""
    r, p = scheme.r, scheme.p
    J = max(J or 0, j0 + 50 + p + r)
    while True:
        A = _assemble(scheme, complex(z), J)
        try:
            lu = splu(A)
        except RuntimeError as exc:
            raise NumericalError(f"singular resolvent system at z = {z}: {exc}") from exc
        cond = _condition(A, lu)
        if not math.isfinite(cond) or cond > COND_LIMIT:
            raise NumericalError(f"resolvent system badly conditioned at z = {z} (cond ~ {cond:.2e}); "
                                 "z is effectively in the spectrum")
        rhs = np.zeros(J + r, dtype=complex)
        rhs[j0 + r - 1] = 1.0
        w = lu.solve(rhs)
        edge = float(np.max(np.abs(w[-p:])))
        if edge < EDGE_TOL or not auto_grow:
            break
        if 2 * J > MAX_WINDOW:
            raise WindowError(f"edge magnitude {edge:.2e} at J = {J}; Green's function decays too slowly")
        J *= 2
    return SpatialGreenField(complex(z), j0, np.arange(1 - r, J + 1), w, J, edge, cond, "direct")


def _projector_data(scheme: Scheme, z: complex):
    basis = stable_basis(scheme, z)
    Vs = basis.columns / np.linalg.norm(basis.columns, axis=0)
    Vu = unstable_columns(scheme, z, basis)
    Vu = Vu / np.linalg.norm(Vu, axis=0)
    M = companion(scheme, z).entries
    P = np.hstack((Vs, Vu))
    Pinv = np.linalg.inv(P)
    r = scheme.r
    As = Pinv[:r] @ M @ Vs
    Au = Pinv[r:] @ M @ Vu
    e = np.zeros(P.shape[0], dtype=complex)
    e[0] = 1.0
    coords = Pinv @ e
    return basis, Vs, Vu, As, Au, coords[:r], coords[r:]


def spatial_green_structured(scheme: Scheme, z: complex, j0: int, J: int) -> SpatialGreenField:
    """Green's function from the projector formulas with Dirac data at j0.

    Unstable coordinates are summed backwards from j0 (they vanish for
    j > j0), the stable coordinates start from the boundary condition
    B W_1 = 0 and run forwards.  The scalar value w_{j-r} is the last
    entry of W_j.
    """
    r, p = scheme.r, scheme.p
    ap = scheme.coef(p)
    basis, Vs, Vu, As, Au, cs, cu = _projector_data(scheme, z)
    B = boundary_matrix(scheme)
    BVs = B @ Vs
    if svdvals(BVs).min() / np.linalg.norm(B, 2) < 1e-8:
        raise SingularBoundaryError(f"B restricted to E^s(z) is singular at z = {z}; "
                                    "use residue_at_root for a Lopatinskii root")
    steps = J + r
    Au_inv = np.linalg.inv(Au)
    y = np.zeros((steps + 1, p), dtype=complex)  # y[j] = unstable coords of W_j
    if j0 <= steps:
        y[j0] = Au_inv @ cu / ap
        for j in range(j0 - 1, 0, -1):
            y[j] = Au_inv @ y[j + 1]
    x = np.zeros((steps + 1, r), dtype=complex)
    x[1] = -np.linalg.solve(BVs, B @ (Vu @ y[1]))
    for j in range(1, steps):
        x[j + 1] = As @ x[j] - (cs / ap if j == j0 else 0.0)
    W_last = x[1:] @ Vs[-1] + y[1:] @ Vu[-1]
    return SpatialGreenField(complex(z), j0, np.arange(1 - r, J + 1), W_last, J, 0.0, float("nan"),
                             "structured")


# --------------------------------------------------------------------------
# decay certificates


@dataclass(frozen=True)
class DecayCertificate:
    C: float
    c: float
    sup_ratio: float
    c_left: float = float("nan")
    c_right: float = float("nan")


def _side_rate(d: np.ndarray, mag: np.ndarray) -> float:
    keep = mag > 0
    if keep.sum() < 3:
        return float("nan")
    return float(-np.polyfit(d[keep], np.log(mag[keep]), 1)[0])


def fit_decay(field: SpatialGreenField, j_max: Optional[int] = None, floor: float = 1e-13) -> DecayCertificate:
    """C exp(-c |j - j0|) dominating |G| on j >= 1.

    Rates are least-squares slopes of log|G| on each side of j0 (values
    below ``floor`` times the peak are roundoff and ignored); the weaker
    rate is kept and C is the smallest constant that dominates.
    """
    j = field.j
    v = np.abs(field.values)
    keep = j >= 1
    if j_max is not None:
        keep &= j <= j_max
    j, v = j[keep], v[keep]
    v = np.where(v >= floor * v.max(), v, 0.0)
    d = np.abs(j - field.j0).astype(float)
    right = _side_rate(d[j > field.j0], v[j > field.j0])
    left = _side_rate(d[j < field.j0], v[j < field.j0])
    rates = [c for c in (left, right) if math.isfinite(c)]
    if not rates:
        raise NumericalError("not enough samples to fit a decay rate")
    c = min(rates)
    if not c > 0:
        raise NumericalError(f"Green's function does not decay (rate {c:.3e}); z is in or near the spectrum")
    C = float(np.max(v * np.exp(c * d)))
    sup_ratio = float(np.max(v * np.exp(c * d)) / C)
    return DecayCertificate(C, c, sup_ratio, left, right)


# --------------------------------------------------------------------------
# surface waves


@dataclass(frozen=True)
class SurfaceWaveProfile:
    root: LopatinskiiRoot
    j0: int
    j: np.ndarray
    values: np.ndarray
    decay_C: float
    decay_c: float
    method_gap: float = 0.0  # max |quadrature - closed form|
    quadrature: Optional[np.ndarray] = None

    def at(self, j) -> np.ndarray:
        return self.values[np.asarray(j) - self.j[0]]


def adjugate(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=A.dtype)
    adj = np.empty_like(A)
    for i in range(n):
        for k in range(n):
            minor = np.delete(np.delete(A, i, axis=0), k, axis=1)
            adj[k, i] = (-1) ** (i + k) * np.linalg.det(minor)
    return adj


def residue_closed_form(scheme: Scheme, z_k: complex, j0: int, J: int) -> np.ndarray:
    """w_k(j, j0) for j = 1-r..J from adj(B V)/Delta' and the geometric sequence M^{j-1}."""
    r, p = scheme.r, scheme.p
    ap = scheme.coef(p)
    basis = stable_basis(scheme, z_k)
    V = basis.columns
    B = boundary_matrix(scheme)
    dprime = lopatinskii_derivative(scheme, z_k, reference=basis.eigenvalues)
    D = adjugate(B @ V) / dprime
    M = companion(scheme, z_k).entries
    _, _, Vu, _, Au, _, cu = _projector_data(scheme, z_k)
    pu_e = Vu @ cu
    u1 = np.linalg.matrix_power(np.linalg.inv(M), j0) @ pu_e
    x = D @ (-(B @ u1) / ap)
    # Iterate in stable coordinates: stepping W itself would amplify the
    # roundoff component along the unstable eigenvectors.
    As = np.linalg.pinv(V) @ M @ V
    out = np.empty(J + r, dtype=complex)
    for j in range(J + r):
        out[j] = V[-1] @ x
        x = As @ x
    return out


def residue_quadrature(scheme: Scheme, z_k: complex, j0: int, J: int,
                       radius: float = RESIDUE_RADIUS, nodes: int = RESIDUE_NODES) -> np.ndarray:
    """(1 / 2 pi i) contour integral of G_z around z_k by the trapezoid rule."""
    acc = np.zeros(J + scheme.r, dtype=complex)
    for m in range(nodes):
        dz = radius * np.exp(2j * np.pi * m / nodes)
        acc += dz * spatial_green_structured(scheme, z_k + dz, j0, J).values
    return acc / nodes


def fit_profile_decay(j: np.ndarray, values: np.ndarray, j0: int, floor: float = 1e-13):
    """(C, c) with |w(j)| <= C exp(-c (j + j0)) on j >= 1."""
    keep = j >= 1
    jj, v = j[keep].astype(float), np.abs(values[keep])
    use = v >= floor * v.max()
    c = _side_rate(jj[use], v[use])
    if not c > 0:
        raise NumericalError(f"surface wave does not decay in j (rate {c:.3e})")
    C = float(np.max(v * np.exp(c * (jj + j0))))
    return C, c


def residue_at_root(scheme: Scheme, root: LopatinskiiRoot, j0: int, J: int = 120,
                    radius: float = RESIDUE_RADIUS, nodes: int = RESIDUE_NODES) -> SurfaceWaveProfile:
    if not root.simple:
        raise NumericalError(f"root {root.z} is not simple; the residue is not a single surface wave")
    if j0 < 1:
        raise ValueError("j0 must be at least 1")
    closed = residue_closed_form(scheme, root.z, j0, J)
    quad = residue_quadrature(scheme, root.z, j0, J, radius, nodes)
    gap = float(np.max(np.abs(closed - quad)))
    if gap > RESIDUE_ABORT * max(1.0, float(np.max(np.abs(closed)))):
        raise NumericalError(f"residue methods disagree by {gap:.2e} at z = {root.z}; "
                             "multiple root or conditioning failure")
    j = np.arange(1 - scheme.r, J + 1)
    C, c = fit_profile_decay(j, closed, j0)
    return SurfaceWaveProfile(root, j0, j, closed, C, c, gap, quad)


def eigen_residual(scheme: Scheme, profile: SurfaceWaveProfile) -> float:
    """max residual of z_k w - T w = 0 (interior and boundary rows), relative to max |w|."""
    bc, interior = equation_residuals(scheme, profile.root.z, profile.values)
    scale = float(np.max(np.abs(profile.values)))
    return float(max(bc.max(initial=0.0), interior.max(initial=0.0)) / scale)


def remainder_bound_check(scheme: Scheme, root: LopatinskiiRoot, j0: int, radius: float = 1e-2,
                          n_samples: int = 16, J: int = 120,
                          profile: Optional[SurfaceWaveProfile] = None,
                          scale: float = 1.0) -> DecayCertificate:
    """Uniform decay certificate for R_z = G_z - w_k / (z - z_k) on |z - z_k| = radius.

    ``scale`` multiplies the subtracted residue; any value other than 1
    leaves an uncancelled pole and the fitted C grows like 1/radius.
    """
    if profile is None:
        profile = residue_at_root(scheme, root, j0, J)
    w = scale * profile.values[: J + scheme.r]
    certs = []
    for m in range(n_samples):
        dz = radius * np.exp(2j * np.pi * (m + 0.5) / n_samples)
        G = spatial_green_structured(scheme, root.z + dz, j0, J)
        R = SpatialGreenField(G.z, j0, G.j, G.values - w / dz, J, method="remainder")
        certs.append(fit_decay(R))
    c = min(q.c for q in certs)
    C = max(q.C for q in certs)
    return DecayCertificate(C, c, 1.0, min(q.c_left for q in certs), min(q.c_right for q in certs))


# --------------------------------------------------------------------------
# CSV


def write_field_csv(field: SpatialGreenField, path) -> str:
    v = field.values
    return write_csv(path, ("j", "re", "im", "abs"), zip(field.j, v.real, v.imag, np.abs(v)))


def write_profile_csv(profile: SurfaceWaveProfile, path) -> str:
    v = profile.values
    return write_csv(path, ("j", "re", "im"), zip(profile.j, v.real, v.imag))
