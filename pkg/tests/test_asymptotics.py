import math

import numpy as np
import pytest

from fdstab.asymptotics import (
    DEFAULT_N,
    GaussianCertificate,
    certify_power_bound,
    collapse_points,
    decompose,
    fit_gaussian,
    gaussian_l1_mass,
    probe_growth,
    surface_constants,
    write_certificate_csv,
    write_collapse_csv,
)
from fdstab.errors import CertificateError, NumericalError
from fdstab.evolution import power_norm_probe, temporal_green
from fdstab.resolvent import residue_at_root


@pytest.fixture(scope="module")
def lf_report(lf, lf_root):
    return decompose(lf, 3, roots_with_profiles=[(lf_root, residue_at_root(lf, lf_root, 3))])


@pytest.fixture(scope="module")
def lf_cert(lf_report, lf_fit, lf):
    return fit_gaussian(lf_report, lf_fit, lf)


def test_decompose_subtracts_surface_wave(lf, lf_report):
    assert lf_report.n_list == list(DEFAULT_N)
    for n in DEFAULT_N:
        j, R = lf_report.remainders[n]
        g = temporal_green(lf, 3, n)
        # near the boundary the remainder is tiny relative to G^n itself
        assert abs(R[0]) < 1e-3 * abs(g.at(1))
        assert lf_report.remainder_sup[n] > 0


def test_decompose_without_subtraction_leaves_constant_floor(lf, lf_report):
    bare = decompose(lf, 3)
    for n in DEFAULT_N:
        assert bare.remainder_sup[n] >= 0.01
    # on j >= 1 the surface wave peaks at j = 1 with modulus w(1, 3) for every n
    assert lf_report.surface_sup[1600] == pytest.approx(0.01052449399716583, rel=1e-10)


def test_decompose_checks_profile_source(lf, lf_root):
    prof = residue_at_root(lf, lf_root, 2)
    with pytest.raises(ValueError):
        decompose(lf, 3, (100, 800), [(lf_root, prof)])


def test_decompose_refuses_multiple_root(lf, lf_root):
    prof = residue_at_root(lf, lf_root, 3)
    fake = type(lf_root)(lf_root.z, lf_root.theta, 0.0, 0.0, False)
    with pytest.raises(NumericalError):
        decompose(lf, 3, (100, 800), [(fake, prof)])


def test_collapse_ratio_lf(lf_report):
    assert lf_report.collapse_ratio(1) == pytest.approx(1.0017, abs=5e-4)


def test_certificate_lf(lf_cert):
    assert lf_cert.valid
    assert lf_cert.max_violation == pytest.approx(1.0, abs=1e-12)
    assert lf_cert.C == pytest.approx(0.5604, abs=1e-3)
    assert lf_cert.omega == pytest.approx(0.9021, abs=1e-3)
    assert lf_cert.exponent == 2.0
    assert lf_cert.train_n == (100, 200)
    assert all(v <= 1.0 + 1e-12 for v in lf_cert.per_n)
    # least squares through the centre of the cloud sits below the data
    assert lf_cert.ls_violation > 1.5


def test_wrong_mu_and_missed_root_fail(lf, lf_fit, lf_report):
    with pytest.raises(CertificateError) as info:
        fit_gaussian(lf_report, lf_fit, lf, mu=2)
    assert info.value.certificate.max_violation > 1e5
    with pytest.raises(CertificateError) as info:
        fit_gaussian(decompose(lf, 3), lf_fit, lf)
    assert info.value.certificate.max_violation > 1e3
    loose = fit_gaussian(lf_report, lf_fit, lf, mu=2, strict=False)
    assert not loose.valid


def test_fit_needs_wide_n_range(lf, lf_fit, lf_root):
    rep = decompose(lf, 3, (100, 200, 400), [(lf_root, residue_at_root(lf, lf_root, 3))])
    with pytest.raises(ValueError):
        fit_gaussian(rep, lf_fit, lf)


def test_collapse_points_scaling(lf_report):
    n, x, y = collapse_points(lf_report, 1, [400])
    j, R = lf_report.remainders[400]
    assert np.allclose(x, (j - 3 - 0.5 * 400) / 20)
    assert np.allclose(y, np.abs(R) * 20)


def test_gaussian_mass_tends_to_integral(lf_cert):
    # Riemann sums of C/s exp(-omega (x/s)^2) approach C sqrt(pi / omega)
    mass = gaussian_l1_mass(lf_cert, 2000)
    assert mass == pytest.approx(lf_cert.C * math.sqrt(math.pi / lf_cert.omega), rel=1e-6)
    q = 4 / 3
    cert = GaussianCertificate(2, 0.5, 1.0, 0.7, (100,), 1.0)
    integral = 2 * math.gamma(1 + 1 / q) / 0.7 ** (1 / q)
    # the sup runs over all n, and coarse grids at small n overshoot the limit
    assert integral * (1 - 1e-3) <= gaussian_l1_mass(cert, 3000) <= integral * 1.05


def test_surface_constants(lf, lf_root):
    ((C, c),) = surface_constants(lf, [lf_root])
    assert c == pytest.approx(-math.log(5 - 2 * math.sqrt(5)), rel=1e-9)
    assert C == pytest.approx(3.388854382008043, rel=1e-9)
    for j0 in (1, 2, 5):
        w = residue_at_root(lf, lf_root, j0, J=60)
        j = np.arange(1, 61)
        assert np.all(np.abs(w.at(j)) <= C * np.exp(-c * (j + j0)) * (1 + 1e-9))


def test_power_bound(lf, lf_report, lf_cert, lf_roots):
    probe = power_norm_probe(lf, 2000, roots=lf_roots)
    pb = certify_power_bound(lf, lf_report, lf_cert, probe)
    e = math.exp(-2 * 0.6389165189617595)
    assert pb.surface_term == pytest.approx(3.388854382008043 * e / (1 - e), rel=1e-9)
    assert pb.bound == pytest.approx(pb.surface_term + pb.gaussian_term)
    assert pb.probe_max <= pb.bound
    assert pb.probe_growth == pytest.approx(1.0, abs=1e-3)
    assert probe_growth(probe) == pb.probe_growth


def test_power_bound_refuses_invalid(lf, lf_report, lf_cert):
    bad = GaussianCertificate(1, 0.5, 1.0, 1.0, (100,), 3.0)
    with pytest.raises(CertificateError):
        certify_power_bound(lf, lf_report, [lf_cert, bad])


def test_power_bound_refuses_low_bound(lf, lf_report, lf_roots):
    tiny = GaussianCertificate(1, 0.5, 1e-6, 1.0, (100,), 1.0)
    probe = power_norm_probe(lf, 200, roots=lf_roots)
    with pytest.raises(CertificateError):
        certify_power_bound(lf, lf_report.__class__(3, 0.5, [], {}), tiny, probe)


def test_csv(tmp_path, lf_report, lf_cert):
    lines = open(write_collapse_csv(lf_report, 1, tmp_path / "c.csv")).read().splitlines()
    assert lines[0] == "n,x,y" and lines[1].startswith("100,")
    lines = open(write_certificate_csv(lf_cert, tmp_path / "k.csv")).read().splitlines()
    assert lines[0] == "mu,alpha,C,omega,max_violation" and lines[1].startswith("1,0.5,")
