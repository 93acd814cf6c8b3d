"""Surface-wave subtraction, generalized Gaussian envelope of the remainder,
and the convolution bound on |T^n| built from both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .errors import CertificateError, NumericalError
from .evolution import NormProbe, temporal_green_snapshots
from .output import write_csv
from .resolvent import SurfaceWaveProfile, fit_profile_decay, residue_closed_form
from .scheme import DissipationFit, Scheme
from .spectral import LopatinskiiRoot

DEFAULT_N = (100, 200, 400, 800, 1600)
SLACK = 0.05
COLLAPSE_FAIL = 2.0


@dataclass
class DecompositionReport:
    j0: int
    alpha: float
    surface_terms: List[Tuple[LopatinskiiRoot, SurfaceWaveProfile]]
    remainder_sup: Dict[int, float]
    remainders: Dict[int, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    green_sup: Dict[int, float] = field(default_factory=dict)
    surface_sup: Dict[int, float] = field(default_factory=dict)

    @property
    def n_list(self) -> List[int]:
        return sorted(self.remainder_sup)

    def scaled_sup(self, mu: int) -> Dict[int, float]:
        return {n: s * n ** (1 / (2 * mu)) for n, s in self.remainder_sup.items()}

    def collapse_ratio(self, mu: int, n_min: int = 100) -> float:
        vals = [v for n, v in self.scaled_sup(mu).items() if n >= n_min]
        return max(vals) / min(vals)


def decompose(scheme: Scheme, j0: int, n_list: Sequence[int] = DEFAULT_N,
              roots_with_profiles: Sequence[Tuple[LopatinskiiRoot, SurfaceWaveProfile]] = (),
              J: Optional[int] = None) -> DecompositionReport:
    """R^n = G^n - sum_k w_k z_k^n on the exact support cone of G^n."""
    for root, profile in roots_with_profiles:
        if not root.simple:
            raise NumericalError(f"root {root.z} is not simple; decomposition refused")
        if profile.j0 != j0:
            raise ValueError(f"profile computed for j0 = {profile.j0}, expected {j0}")
    snaps = temporal_green_snapshots(scheme, j0, n_list, J)
    Jw = next(iter(snaps.values())).j[-1]
    waves = []
    for root, profile in roots_with_profiles:
        w = residue_closed_form(scheme, root.z, j0, Jw)
        overlap = min(w.size, profile.values.size)
        scale = max(1.0, float(np.max(np.abs(profile.values))))
        if np.max(np.abs(w[:overlap] - profile.values[:overlap])) > 1e-10 * scale:
            raise NumericalError("surface-wave profile does not match its geometric extension")
        waves.append((root.z, w))
    report = DecompositionReport(j0, scheme.lambda_a, list(roots_with_profiles), {})
    r, p = scheme.r, scheme.p
    for n, g in snaps.items():
        surface = np.zeros(g.values.size, dtype=complex)
        for z, w in waves:
            surface += w * z**n
        R = g.values - surface
        imag = float(np.max(np.abs(R.imag)))
        if imag > 1e-12:
            raise NumericalError(f"remainder at n = {n} is not real (|Im R| = {imag:.2e})")
        d = g.j - j0
        cone = (g.j >= 1) & (d >= -p * n) & (d <= r * n)
        report.remainder_sup[n] = float(np.max(np.abs(R.real[cone])))
        report.remainders[n] = (g.j[cone], R.real[cone])
        report.green_sup[n] = float(np.max(np.abs(g.values[g.j >= 1])))
        report.surface_sup[n] = float(np.max(np.abs(surface[g.j >= 1])))
    return report


# --------------------------------------------------------------------------
# generalized Gaussian envelope


@dataclass(frozen=True)
class GaussianCertificate:
    mu: int
    alpha: float
    C: float
    omega: float
    n_range: Tuple[int, ...]
    max_violation: float
    per_n: Tuple[float, ...] = ()
    train_n: Tuple[int, ...] = ()
    floor: float = 0.0
    peak_ratio: float = float("nan")  # max/min over n of the rescaled peak
    ls_C: float = float("nan")
    ls_omega: float = float("nan")
    ls_violation: float = float("nan")

    @property
    def exponent(self) -> float:
        return 2 * self.mu / (2 * self.mu - 1)

    @property
    def valid(self) -> bool:
        return self.max_violation <= 1 + SLACK

    def envelope(self, x) -> np.ndarray:
        return self.C * np.exp(-self.omega * np.abs(x) ** self.exponent)


def collapse_points(report: DecompositionReport, mu: int, n_list: Optional[Sequence[int]] = None):
    """Rescaled (n, x, y): x = (j - j0 - alpha n) / n^(1/2mu), y = |R| n^(1/2mu)."""
    ns, xs, ys = [], [], []
    for n in (n_list or report.n_list):
        j, R = report.remainders[n]
        s = n ** (1 / (2 * mu))
        xs.append((j - report.j0 - report.alpha * n) / s)
        ys.append(np.abs(R) * s)
        ns.append(np.full(j.size, n))
    return np.concatenate(ns), np.concatenate(xs), np.concatenate(ys)


def _tight_envelope(t: np.ndarray, log_y: np.ndarray) -> Tuple[float, float]:
    """Smallest log C - omega t (omega >= 0) lying above every (t, log y)."""
    res = linprog(c=np.array([t.size, -t.sum()]),
                  A_ub=np.column_stack((-np.ones_like(t), t)), b_ub=-log_y,
                  bounds=[(None, None), (0, None)], method="highs")
    if not res.success:
        raise NumericalError(f"envelope fit failed: {res.message}")
    return float(res.x[0]), float(res.x[1])


def fit_gaussian(report: DecompositionReport, fit: DissipationFit, scheme: Scheme,
                 mu: Optional[int] = None, floor: float = 1e-10, train: int = 2,
                 strict: bool = True) -> GaussianCertificate:
    """Fit C exp(-omega |x|^q), q = 2mu/(2mu-1), to the rescaled remainders.

    The envelope is the tightest one dominating the ``train`` smallest n
    (a linear program in log C and omega); it is then tested on every n,
    and max_violation is the worst ratio of data to envelope.  Points below
    ``floor`` times the largest |G^n| or surface wave are roundoff and
    excluded.
    """
    mu = fit.mu if mu is None else mu
    ns = report.n_list
    if ns[0] < 100 or ns[-1] / ns[0] < 8:
        raise ValueError("fit_gaussian needs min(n) >= 100 and max(n)/min(n) >= 8")
    q = 2 * mu / (2 * mu - 1)
    n_all, x_all, y_all = collapse_points(report, mu)
    # Noise level of the subtraction: rounding in G^n and in the surface waves.
    noise = floor * max(max(report.green_sup.values()), max(report.surface_sup.values(), default=0.0))
    cut = noise * n_all ** (1 / (2 * mu))
    train_n = tuple(ns[:train])
    sel = np.isin(n_all, train_n) & (y_all >= cut)
    log_C, omega = _tight_envelope(np.abs(x_all[sel]) ** q, np.log(y_all[sel]))

    def violation(mask):
        m = mask & (y_all >= cut)
        return float(np.exp(np.max(np.log(y_all[m]) - (log_C - omega * np.abs(x_all[m]) ** q))))

    per_n = tuple(violation(n_all == n) for n in ns)
    peaks = [float(y_all[n_all == n].max()) for n in ns]

    # Plain least squares, kept as a diagnostic of how far a centre fit sits below the data.
    m = y_all >= cut
    A = np.column_stack((np.ones(m.sum()), -np.abs(x_all[m]) ** q))
    (ls_logC, ls_omega), *_ = np.linalg.lstsq(A, np.log(y_all[m]), rcond=None)
    ls_viol = float(np.exp(np.max(np.log(y_all[m]) - (ls_logC - ls_omega * np.abs(x_all[m]) ** q))))

    cert = GaussianCertificate(mu, report.alpha, math.exp(log_C), omega, tuple(ns), max(per_n), per_n,
                               train_n, floor, max(peaks) / min(peaks), math.exp(ls_logC),
                               float(ls_omega), ls_viol)
    if strict and cert.max_violation > COLLAPSE_FAIL:
        err = CertificateError(f"rescaled remainders do not collapse under mu = {mu}: "
                               f"max_violation = {cert.max_violation:.3g} (wrong mu or a missed root)")
        err.certificate = cert
        raise err
    return cert


# --------------------------------------------------------------------------
# power bound


def surface_constants(scheme: Scheme, roots: Sequence[LopatinskiiRoot], j0_max: int = 30,
                      J: int = 80) -> List[Tuple[float, float]]:
    """j0-uniform (C_k, c_k) with |w_k(j, j0)| <= C_k exp(-c_k (j + j0)).

    The rate is the smaller of the decay in j and in j0; C_k dominates every
    profile j0 = 1..j0_max at that rate.
    """
    out = []
    js = np.arange(1 - scheme.r, J + 1)
    for root in roots:
        profiles = [residue_closed_form(scheme, root.z, j0, J) for j0 in range(1, j0_max + 1)]
        _, c_j = fit_profile_decay(js, profiles[0], 1)
        heads = np.array([np.abs(w[js >= 1]).max() for w in profiles])
        keep = heads >= 1e-13 * heads[0]
        c_j0 = float(-np.polyfit(np.arange(1, j0_max + 1)[keep], np.log(heads[keep]), 1)[0])
        c = min(c_j, c_j0)
        jj = js[js >= 1]
        C = max(float(np.max(np.abs(w[js >= 1]) * np.exp(c * (jj + j0))))
                for j0, w in enumerate(profiles, start=1))
        out.append((C, c))
    return out


def gaussian_l1_mass(cert: GaussianCertificate, n_max: int) -> float:
    """sup over 1 <= n <= n_max of sum_x C n^(-1/2mu) exp(-omega (|x - alpha n| / n^(1/2mu))^q)."""
    q, best = cert.exponent, 0.0
    for n in range(1, n_max + 1):
        s = n ** (1 / (2 * cert.mu))
        half = int(math.ceil(s * (40.0 / max(cert.omega, 1e-12)) ** (1 / q))) + 2
        centre = cert.alpha * n
        x = np.arange(math.floor(centre) - half, math.ceil(centre) + half + 1)
        mass = float(np.sum(cert.C / s * np.exp(-cert.omega * (np.abs(x - centre) / s) ** q)))
        best = max(best, mass)
    return best


@dataclass(frozen=True)
class PowerBound:
    bound: float
    surface_term: float
    gaussian_term: float
    surface: Tuple[Tuple[float, float], ...]
    probe_max: float = float("nan")
    probe_growth: float = float("nan")


def certify_power_bound(scheme: Scheme, report: DecompositionReport,
                        cert: GaussianCertificate | Sequence[GaussianCertificate],
                        probe: Optional[NormProbe] = None, n_max: int = 2000,
                        j0_max: int = 30) -> PowerBound:
    """sup_n |T^n| <= sum_k C_k e^{-2c_k} / (1 - e^{-2c_k}) + |g|_l1.

    The surface part follows from Cauchy-Schwarz on the separable kernel
    C_k e^{-c_k (j + j0)}, the bulk part from Young's inequality with the
    generalized Gaussian kernel.  Several certificates (one per source
    index) are merged into the weakest envelope.
    """
    certs = [cert] if isinstance(cert, GaussianCertificate) else list(cert)
    for c in certs:
        if not c.valid:
            raise CertificateError(f"Gaussian certificate invalid (max_violation = {c.max_violation:.3g})")
    merged = GaussianCertificate(certs[0].mu, certs[0].alpha, max(c.C for c in certs),
                                 min(c.omega for c in certs), certs[0].n_range,
                                 max(c.max_violation for c in certs))
    roots = [root for root, _ in report.surface_terms]
    surf = surface_constants(scheme, roots, j0_max)
    surface_term = sum(C * math.exp(-2 * c) / (1 - math.exp(-2 * c)) for C, c in surf)
    gaussian_term = gaussian_l1_mass(merged, n_max)
    bound = surface_term + gaussian_term
    probe_max = growth = float("nan")
    if probe is not None:
        probe_max = float(probe.envelope.max())
        growth = probe_growth(probe)
        if probe_max > bound:
            raise CertificateError(f"probe envelope {probe_max:.4g} exceeds the certified bound {bound:.4g}")
    return PowerBound(bound, surface_term, gaussian_term, tuple(surf), probe_max, growth)


def probe_growth(probe: NormProbe, n_from: int = 200, n_to: int = 2000) -> float:
    """max over n_from <= n <= n_to of envelope(n) / envelope(n_from)."""
    n_to = min(n_to, int(probe.n[-1]))
    seg = probe.envelope[n_from: n_to + 1]
    return float(seg.max() / seg[0])


def write_collapse_csv(report: DecompositionReport, mu: int, path) -> str:
    n, x, y = collapse_points(report, mu)
    return write_csv(path, ("n", "x", "y"), zip(n, x, y))


def write_certificate_csv(cert: GaussianCertificate, path) -> str:
    return write_csv(path, ("mu", "alpha", "C", "omega", "max_violation"),
                     [(cert.mu, cert.alpha, cert.C, cert.omega, cert.max_violation)])
