import json
import math

import numpy as np
import pytest

from fdstab.errors import AssumptionError
from fdstab.scheme import (
    Scheme,
    check_dissipativity,
    damping,
    envelope_c0,
    fit_dissipation,
    in_set_C,
    lax_friedrichs,
    lax_wendroff,
    load_scheme,
    save_scheme,
    symbol,
    validate,
    write_spectrum_csv,
)

from conftest import B_SURFACE
from oracles import lf_symbol, mp_one_minus_modulus_sq


def test_lf_coefficients_and_validation(lf):
    assert np.allclose(lf.a, [5 / 8, 1 / 4, 1 / 8], rtol=0, atol=1e-15)
    report = validate(lf)
    assert report.passed, report.failures
    names = report.names()
    for name in ("structure", "consistency-sum", "consistency-drift", "bernstein", "dissipativity",
                 "dissipation-fit", "dissipation-expansion"):
        assert name in names
    assert float(lf.offsets @ lf.a) == pytest.approx(-0.5, abs=1e-15)


def test_zero_outer_coefficients_is_hard_failure():
    report = validate(Scheme(1, 1, [0.0, 1.0, 0.0], 0.5, 1, [[0.0]]))
    assert not report.passed
    assert report["structure"].hard
    assert "a_{-r} = 0" in report["structure"].detail


def test_structure_failures_do_not_raise():
    for bad in (Scheme(1, 1, [0.5, 0.5], 0.5, 1, [[0.0]]),
                Scheme(1, 1, [0.625, 0.25, 0.125], 0.5, 2, [[0.0, 0.0]]),
                Scheme(1, 1, [0.625, 0.25, 0.125], -0.5, 1, [[0.0]])):
        report = validate(bad)
        assert report["structure"].hard and not report.passed


def test_lax_wendroff_consistency_and_bernstein(lw):
    assert np.allclose(lw.a, [3 / 8, 3 / 4, -1 / 8], atol=1e-15)
    report = validate(lw)
    assert report["consistency-sum"].passed
    assert report["consistency-drift"].passed
    assert report["bernstein"].passed and report["bernstein"].margin == pytest.approx(0.5)


def test_symbol_values(lf):
    assert symbol(lf, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert symbol(lf, math.pi) == pytest.approx(-0.5, abs=1e-15)
    for t in np.linspace(-math.pi, math.pi, 17):
        assert abs(symbol(lf, t) - lf_symbol(t, 0.5, 0.75)) < 1e-15


def test_damping_matches_high_precision(lf, lw):
    # decimal coefficients for LF(0.3, 0.5) so the oracle sees an exactly consistent stencil
    cases = [(lf, lf.a), (lw, lw.a), (lax_friedrichs(0.3, 0.5), ["0.4", "0.5", "0.1"])]
    for s, exact in cases:
        for t in (1e-5, 1e-3, 0.1, 1.0, 3.0):
            ref = mp_one_minus_modulus_sq(exact, s.offsets, t)
            assert damping(s, t) == pytest.approx(ref, rel=1e-9, abs=1e-300)


def test_dissipativity(lf):
    ok, delta0 = check_dissipativity(lf, 4096)
    assert ok and delta0 > 0
    ok, delta0 = check_dissipativity(lax_friedrichs(0.5, 1.2), 4096)
    assert not ok
    assert delta0 == pytest.approx(1 - 1.4, abs=1e-12)
    with pytest.raises(ValueError):
        check_dissipativity(lf, 512)


def test_nearly_pure_shift():
    eps = 1e-3
    s = Scheme(1, 1, [1 - eps, eps / 2, eps / 2], (1 - eps) - eps / 2, 1, [[0.0]])
    ok, delta0 = check_dissipativity(s, 4096)
    assert ok and 0 < delta0 < 1e-2
    fit = fit_dissipation(s)
    assert fit.mu == 1 and fit.beta > 0


def test_fit_lf(lf_fit):
    assert lf_fit.mu == 1
    assert lf_fit.beta == pytest.approx(0.25, abs=1e-3)
    assert lf_fit.theta_window == 0.1


def test_fit_lax_wendroff(lw):
    fit = fit_dissipation(lw)
    assert fit.mu == 2
    assert fit.beta == pytest.approx(0.25 * 0.75 / 8, abs=1e-3)
    # phase error of LW is third order, below the 2 mu + 1 = 5 the expansion needs
    assert fit.phase_order == pytest.approx(3.0, abs=0.1)
    assert not validate(lw)["dissipation-expansion"].passed


def test_fit_rejects_amplifying_symbol():
    # D < lambda_a^2 gives |F| > 1 near 0
    with pytest.raises(AssumptionError, match="beta"):
        fit_dissipation(lax_friedrichs(0.5, 0.2))


def test_fit_expansion_bound(lf, lf_fit):
    theta = np.geomspace(1e-4, 1e-1, 64)
    dev = np.abs(symbol(lf, theta) - lf_fit.expansion(lf.lambda_a, theta))
    assert np.all(dev <= lf_fit.fit_residual * theta ** (2 * lf_fit.mu + 1) * (1 + 1e-12))


def test_envelope(lf, lf_fit):
    env = envelope_c0(lf, lf_fit)
    assert env.c0 > 0 and env.c0_proof > 0
    assert env.c0_proof <= env.c0
    assert env.c0_proof * math.pi ** (2 * env.mu) <= env.delta0 * (1 + 1e-12)
    theta = np.linspace(-math.pi, math.pi, 4097)
    assert all(in_set_C(env, complex(f)) for f in symbol(lf, theta))
    assert all(in_set_C(env, complex(f), conservative=True) for f in symbol(lf, theta))
    assert in_set_C(env, 1.0)
    assert in_set_C(env, 0.0)
    assert not in_set_C(env, 1.01)
    assert not in_set_C(env, -1.0)
    assert in_set_C(env, symbol(lf, 0.3))


def test_envelope_sharp_c0_is_optimal_on_grid(lf, lf_fit):
    env = envelope_c0(lf, lf_fit)
    bigger = env.__class__(env.c0 * 1.001, env.theta0, env.delta0, env.mu, env.c0_proof)
    theta = np.linspace(-math.pi, math.pi, 4097)
    assert not all(in_set_C(bigger, complex(f), atol=0) for f in symbol(lf, theta))


def test_config_roundtrip(tmp_path, lf):
    path = tmp_path / "s.yaml"
    save_scheme(lf, path)
    back = load_scheme(path)
    assert back.r == lf.r and back.p == lf.p and back.p_b == lf.p_b
    assert np.array_equal(back.a, lf.a) and np.array_equal(back.b, lf.b)
    assert back.b[0, 0] == B_SURFACE

    jpath = tmp_path / "s.json"
    jpath.write_text(json.dumps(lf.to_dict()))
    assert np.array_equal(load_scheme(jpath).a, lf.a)


def test_config_missing_keys(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("r: 1\np: 1\n")
    with pytest.raises(AssumptionError, match="missing"):
        load_scheme(path)


def test_spectrum_csv(tmp_path, lf):
    path = write_spectrum_csv(lf, tmp_path / "spec.csv", 64)
    lines = open(path).read().splitlines()
    assert lines[0] == "theta,re,im,modulus"
    assert len(lines) == 66
    theta, re, im, mod = map(float, lines[1].split(","))
    assert theta == -math.pi and mod == pytest.approx(0.5)
