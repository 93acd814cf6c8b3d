"""Command line entry point: ``fdstab <command> [scheme.yaml | --builtin] [flags]``.

Every command prints one JSON object per line and writes its data as CSV
(and figures as SVG) under ``--out``.  Exit codes: 0 when all checks pass,
2 for an assumption violation or bad arguments, 3 for a numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import asymptotics, evolution, resolvent, scheme as schemes, spectral
from .errors import AssumptionError, FdstabError, NumericalError
from .figures import Panel, Series, write_svg
from .output import write_csv

EXIT_OK, EXIT_ASSUMPTION, EXIT_NUMERICAL = 0, 2, 3

COMMANDS = ("validate", "spectrum", "lopatinskii", "green-spatial", "green-temporal",
            "residue", "certify", "power-bound", "example-lf")


@dataclass
class RunConfig:
    command: str
    scheme_path: Optional[str] = None
    builtin: bool = False
    out: str = "fdstab-out"
    j0: Optional[int] = None
    n_max: Optional[int] = None
    window: Optional[int] = None
    rho: float = 1.2
    nodes: int = 512
    tol: float = 1e-8
    seed: int = 0
    z: complex = 1.5
    n_theta: int = 4096
    trials: int = 16
    n_list: Tuple[int, ...] = ()
    allow: Tuple[str, ...] = ()
    stream: object = field(default=None, repr=False)

    def check(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not 0 < self.tol < 0.1:
            raise ValueError("--tol must lie in (0, 0.1)")
        if self.j0 is not None and self.j0 < 1:
            raise ValueError("--j0 must be >= 1")
        if self.n_max is not None and self.n_max < 0:
            raise ValueError("--n-max must be >= 0")
        if self.n_theta < 2048:
            raise ValueError("--n-theta must be >= 2048")
        if self.trials < 0:
            raise ValueError("--trials must be >= 0")


# --------------------------------------------------------------------------
# built-in example


def stable_kappa(scheme: schemes.Scheme, z: complex) -> complex:
    s = spectral.split(spectral.companion(scheme, z))
    if len(s.stable) != 1:
        raise NumericalError(f"expected a single stable eigenvalue at z = {z}")
    return complex(s.stable[0])


def builtin_lf_scheme() -> schemes.Scheme:
    """Lax-Friedrichs, lambda_a = 1/2, D = 3/4, with u_0 = u_1 / kappa_s(-1)."""
    interior = schemes.lax_friedrichs(0.5, 0.75)
    kappa = stable_kappa(interior, -1.0).real
    return interior.with_boundary([[1.0 / kappa]], name="lax-friedrichs-surface-wave")


def builtin_lf_example(out: str = "fdstab-out") -> RunConfig:
    return RunConfig("certify", builtin=True, out=out, j0=3)


def _load(cfg: RunConfig) -> schemes.Scheme:
    if cfg.builtin:
        return builtin_lf_scheme()
    if cfg.scheme_path is None:
        raise ValueError("a scheme config path or --builtin is required")
    if not os.path.exists(cfg.scheme_path):
        raise FileNotFoundError(cfg.scheme_path)
    return schemes.load_scheme(cfg.scheme_path)


# --------------------------------------------------------------------------
# reporting


def _jsonable(v):
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


class Reporter:
    def __init__(self, command: str, stream=None):
        self.command = command
        self.stream = stream or sys.stdout

    def emit(self, **fields) -> None:
        line = {"command": self.command}
        line.update(fields)
        self.stream.write(json.dumps(_jsonable(line)) + "\n")
        self.stream.flush()

    def check(self, name: str, passed: bool, **fields) -> bool:
        self.emit(check=name, passed=bool(passed), **fields)
        return bool(passed)


def _root_dict(q: spectral.LopatinskiiRoot) -> dict:
    return {"z": q.z, "theta": q.theta, "delta_abs": q.delta_abs, "dprime_abs": q.dprime_abs,
            "simple": q.simple}


def _require_simple(roots) -> None:
    bad = [q for q in roots if not q.simple]
    if bad:
        raise AssumptionError(f"non-simple Lopatinskii root at z = {bad[0].z}; decomposition refused")


# --------------------------------------------------------------------------
# commands


def cmd_validate(cfg, sch, rep: Reporter) -> int:
    report = schemes.validate(sch)
    for c in report.checks:
        rep.check(c.name, c.passed, margin=c.margin, detail=c.detail, hard=c.hard)
    if report.fit is not None:
        rep.emit(dissipation={"mu": report.fit.mu, "beta": report.fit.beta,
                              "fit_residual": report.fit.fit_residual,
                              "phase_order": report.fit.phase_order})
    if report.envelope is not None:
        e = report.envelope
        rep.emit(envelope={"c0": e.c0, "c0_proof": e.c0_proof, "theta0": e.theta0, "delta0": e.delta0})
    failed = [c.name for c in report.failures]
    code = EXIT_OK if not failed else EXIT_ASSUMPTION
    rep.emit(status="ok" if not failed else "fail", failed=failed, exit=code)
    return code


def _validated(cfg, sch, rep: Reporter) -> schemes.ValidationReport:
    report = schemes.validate(sch)
    for c in report.failures:
        if c.name in cfg.allow:
            rep.emit(warning=f"{c.name} failed but allowed: {c.detail}")
        else:
            raise AssumptionError(f"{c.name}: {c.detail}")
    return report


def cmd_spectrum(cfg, sch, rep: Reporter) -> int:
    _validated(cfg, sch, rep)
    out = cfg.out
    schemes.write_spectrum_csv(sch, os.path.join(out, "spectrum.csv"))
    spectral.write_eigenvalue_cloud(sch, os.path.join(out, "eigenvalues.csv"), tol=cfg.tol)
    roots = spectral.find_roots(sch, cfg.n_theta, cfg.tol)
    write_csv(os.path.join(out, "roots.csv"), ("z_re", "z_im", "theta", "abs_delta", "abs_dprime", "simple"),
              [(q.z.real, q.z.imag, q.theta, q.delta_abs, q.dprime_abs, q.simple) for q in roots])
    theta = np.linspace(-np.pi, np.pi, 1025)
    F = schemes.symbol(sch, theta)
    circle = np.exp(1j * theta)
    series = [Series(circle.real, circle.imag, "unit circle", "#999999", dashed=True),
              Series(F.real, F.imag, "essential spectrum", "#1f4e9c")]
    if roots:
        series.append(Series([q.z.real for q in roots], [q.z.imag for q in roots], "eigenvalues", "#c0392b",
                             marker="cross"))
    write_svg([Panel(f"spectrum of T ({sch.name or 'scheme'})", "Re z", "Im z", series, equal_aspect=True)],
              os.path.join(out, "spectrum.svg"), width=420, height=420)
    rep.emit(roots=[_root_dict(q) for q in roots], out=out, status="ok")
    return EXIT_OK


def cmd_lopatinskii(cfg, sch, rep: Reporter) -> int:
    _validated(cfg, sch, rep)
    spectral.write_lopatinskii_profile(sch, os.path.join(cfg.out, "lopatinskii.csv"), cfg.n_theta)
    report = spectral.check_boundary(sch, cfg.n_theta)
    for c in report.checks:
        rep.check(c.name, c.passed, margin=c.margin, detail=c.detail)
    rep.emit(roots=[_root_dict(q) for q in report.roots], status="ok" if report.passed else "fail")
    return EXIT_OK if report.passed else EXIT_ASSUMPTION


def cmd_green_spatial(cfg, sch, rep: Reporter) -> int:
    _validated(cfg, sch, rep)
    z, j0 = complex(cfg.z), cfg.j0 or 10
    J = cfg.window or 400
    direct = resolvent.spatial_green_direct(sch, z, j0, J)
    structured = resolvent.spatial_green_structured(sch, z, j0, J)
    jmax = min(100, J)
    diff = float(np.max(np.abs(direct.window(jmax) - structured.window(jmax))))
    bc, interior = resolvent.equation_residuals(sch, z, direct.values, j0)
    cert = resolvent.fit_decay(direct)
    resolvent.write_field_csv(direct, os.path.join(cfg.out, "green_direct.csv"))
    resolvent.write_field_csv(structured, os.path.join(cfg.out, "green_structured.csv"))
    ok = rep.check("oracle-equivalence", diff < 1e-10, max_abs_diff=diff, j_max=jmax)
    ok &= rep.check("defining-equation", max(bc.max(initial=0), interior.max()) < 1e-9,
                    boundary_residual=bc.max(initial=0), interior_residual=interior.max())
    rep.emit(z=z, j0=j0, J=direct.J, edge=direct.edge, cond=direct.cond,
             decay={"C": cert.C, "c": cert.c, "c_left": cert.c_left, "c_right": cert.c_right},
             status="ok" if ok else "fail", exit=EXIT_OK if ok else EXIT_NUMERICAL)
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_green_temporal(cfg, sch, rep: Reporter) -> int:
    _validated(cfg, sch, rep)
    j0 = cfg.j0 or 3
    n_list = cfg.n_list or ((cfg.n_max,) if cfg.n_max is not None else (1, 5, 20, 50))
    ok, fields = True, []
    for n in n_list:
        g = evolution.temporal_green(sch, j0, n)
        c = evolution.temporal_green_contour(sch, j0, n, cfg.rho, cfg.nodes, g.j[-1])
        diff = float(np.max(np.abs(g.values - c.values)))
        d = g.j - j0
        outside = (d > sch.r * n) | (d < -sch.p * n)
        ok &= rep.check("stepping-vs-contour", diff < 1e-8, n=n, max_abs_diff=diff)
        ok &= rep.check("support", bool(np.all(g.values[outside] == 0)), n=n)
        fields.append(g)
    evolution.write_temporal_csv(fields, os.path.join(cfg.out, "green_temporal.csv"))
    rep.emit(j0=j0, rho=cfg.rho, nodes=cfg.nodes, status="ok" if ok else "fail", exit=EXIT_OK if ok else EXIT_NUMERICAL)
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_residue(cfg, sch, rep: Reporter) -> int:
    _validated(cfg, sch, rep)
    j0, J = cfg.j0 or 3, cfg.window or 60
    roots = spectral.find_roots(sch, cfg.n_theta, cfg.tol)
    _require_simple(roots)
    ok = True
    for k, root in enumerate(roots):
        prof = resolvent.residue_at_root(sch, root, j0, J)
        eig = resolvent.eigen_residual(sch, prof)
        resolvent.write_profile_csv(prof, os.path.join(cfg.out, f"residue_{k}.csv"))
        ok &= rep.check("residue-dual-method", prof.method_gap < 1e-8, root=_root_dict(root),
                        max_abs_diff=prof.method_gap)
        ok &= rep.check("eigenvector-relation", eig < 1e-8, residual=eig)
        rep.emit(root=root.z, j0=j0, w_1=prof.at(1), decay_C=prof.decay_C, decay_c=prof.decay_c)
    rep.emit(n_roots=len(roots), status="ok" if ok else "fail", exit=EXIT_OK if ok else EXIT_NUMERICAL)
    return EXIT_OK if ok else EXIT_NUMERICAL


def _surface_terms(sch, roots, j0):
    return [(q, resolvent.residue_at_root(sch, q, j0)) for q in roots]


def _gaussian_overlay(fit, alpha, n, x):
    if fit.mu == 1:
        return np.exp(-(x - alpha * n) ** 2 / (4 * fit.beta * n)) / math.sqrt(4 * math.pi * fit.beta * n)
    return None


def cmd_certify(cfg, sch, rep: Reporter) -> int:
    report = _validated(cfg, sch, rep)
    fit = report.fit
    j0 = cfg.j0 or 3
    n_list = cfg.n_list or asymptotics.DEFAULT_N
    roots = spectral.find_roots(sch, cfg.n_theta, cfg.tol)
    _require_simple(roots)
    terms = _surface_terms(sch, roots, j0)
    dec = asymptotics.decompose(sch, j0, n_list, terms)
    cert = asymptotics.fit_gaussian(dec, fit, sch, strict=False)
    ratio = dec.collapse_ratio(fit.mu)
    out = cfg.out
    asymptotics.write_collapse_csv(dec, fit.mu, os.path.join(out, "collapse.csv"))
    asymptotics.write_certificate_csv(cert, os.path.join(out, "certificate.csv"))

    ok = rep.check("remainder-scaling", ratio < 3, ratio=ratio, scaled_sup=dec.scaled_sup(fit.mu))
    ok &= rep.check("gaussian-collapse", cert.valid, max_violation=cert.max_violation, per_n=cert.per_n,
                    C=cert.C, omega=cert.omega, mu=cert.mu, exponent=cert.exponent,
                    peak_ratio=cert.peak_ratio, ls_violation=cert.ls_violation)

    # Boundary layer at n = 500 against the surface waves.
    n_b = 500
    snap = evolution.temporal_green(sch, j0, n_b)
    jb = np.arange(1, 11)
    panels = [_snapshot_panel(sch, fit, j0, n_list, dec)]
    if terms:
        wave = sum(prof.at(jb) * q.z ** n_b for q, prof in terms)
        scale = abs(sum(prof.at(1) for _, prof in terms))
        dev = float(np.max(np.abs(np.abs(snap.at(jb)) - np.abs(wave))) / scale)
        ok &= rep.check("boundary-envelope", dev < 0.05, n=n_b, relative_deviation=dev)
        panels.append(_boundary_panel(sch, j0, n_b, snap, terms))
        write_csv(os.path.join(out, "boundary.csv"), ("j", "green", "surface"),
                  zip(jb, snap.at(jb), np.real(wave)))
    write_svg(panels, os.path.join(out, "temporal.svg"))
    evolution.write_temporal_csv([evolution.temporal_green_snapshots(sch, j0, n_list)[n] for n in n_list],
                                 os.path.join(out, "snapshots.csv"))
    rep.emit(roots=[_root_dict(q) for q in roots], j0=j0, n_list=list(n_list),
             status="ok" if ok else "fail", exit=EXIT_OK if ok else EXIT_NUMERICAL)
    return EXIT_OK if ok else EXIT_NUMERICAL


def _snapshot_panel(sch, fit, j0, n_list, dec) -> Panel:
    snaps = evolution.temporal_green_snapshots(sch, j0, n_list)
    series = []
    for n in n_list:
        g = snaps[n]
        keep = g.j >= 1
        series.append(Series(g.j[keep] - j0, g.values[keep].real, f"n = {n}"))
        overlay = _gaussian_overlay(fit, sch.lambda_a, n, (g.j[keep] - j0).astype(float))
        if overlay is not None:
            series.append(Series(g.j[keep] - j0, overlay, "", "#555555", dashed=True))
    return Panel("Green's function snapshots (dashed: Gaussian)", "j - j0", "G^n(j, j0)", series)


def _boundary_panel(sch, j0, n, snap, terms) -> Panel:
    j = np.arange(1, 31)
    series = [Series(j, snap.at(j).real, f"G^{n}(j, {j0})", "#1f4e9c", marker="circle")]
    for q, prof in terms:
        kappa = stable_kappa(sch, q.z) if sch.r == 1 else None
        if kappa is not None:
            env = abs(prof.at(1)) * abs(kappa) ** (j - 1.0)
            series.append(Series(j, env, "|w(1)| |kappa_s|^(j-1)", "#c0392b", dashed=True))
            series.append(Series(j, -env, "", "#c0392b", dashed=True))
    return Panel("near the boundary", "j", "value", series)


def cmd_power_bound(cfg, sch, rep: Reporter) -> int:
    report = _validated(cfg, sch, rep)
    fit = report.fit
    n_max = cfg.n_max if cfg.n_max is not None else 2000
    roots = spectral.find_roots(sch, cfg.n_theta, cfg.tol)
    _require_simple(roots)
    probe = evolution.power_norm_probe(sch, n_max, trials=cfg.trials, seed=cfg.seed, roots=roots)
    evolution.write_probe_csv(probe, os.path.join(cfg.out, "norm_probe.csv"))
    n_list = cfg.n_list or asymptotics.DEFAULT_N
    sources = (cfg.j0,) if cfg.j0 else (1, 2, 3, 4, 5)
    certs, dec = [], None
    for j0 in sources:
        dec = asymptotics.decompose(sch, j0, n_list, _surface_terms(sch, roots, j0))
        certs.append(asymptotics.fit_gaussian(dec, fit, sch, strict=False))
        rep.emit(j0=j0, C=certs[-1].C, omega=certs[-1].omega, max_violation=certs[-1].max_violation)
    pb = asymptotics.certify_power_bound(sch, dec, certs, probe=None, n_max=n_max)
    env_max = float(probe.envelope.max())
    growth = asymptotics.probe_growth(probe, min(200, n_max), n_max) if n_max >= 200 else float("nan")
    ok = rep.check("probe-below-bound", env_max <= pb.bound, probe_max=env_max, bound=pb.bound,
                   surface_term=pb.surface_term, gaussian_term=pb.gaussian_term)
    if n_max >= 200:
        ok &= rep.check("envelope-growth", growth < 1.05, growth=growth, n_from=200, n_to=n_max)
    rep.emit(worst_input=str(probe.worst[int(np.argmax(probe.envelope))]), small_n=probe.envelope[:5],
             status="ok" if ok else "fail", exit=EXIT_OK if ok else EXIT_NUMERICAL)
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_example_lf(cfg, sch, rep: Reporter) -> int:
    lf = builtin_lf_scheme()
    path = os.path.join(cfg.out, "lf_surface_wave.yaml")
    os.makedirs(cfg.out, exist_ok=True)
    schemes.save_scheme(lf, path)
    kappa = stable_kappa(lf, -1.0).real
    fit = schemes.fit_dissipation(lf)
    k_err = abs(kappa - (-5 + 2 * math.sqrt(5)))
    b_err = abs(lf.b[0, 0] - (-1 - 2 * math.sqrt(5) / 5))
    ok = rep.check("kappa_s(-1)", k_err < 1e-12, value=kappa, error=k_err)
    ok &= rep.check("b", b_err < 1e-12, value=float(lf.b[0, 0]), error=b_err)
    ok &= rep.check("mu", fit.mu == 1, value=fit.mu)
    ok &= rep.check("beta", abs(fit.beta - 0.25) < 1e-3, value=fit.beta)
    rep.emit(config=path, a=lf.a, lambda_a=lf.lambda_a, status="ok" if ok else "fail", exit=EXIT_OK if ok else EXIT_NUMERICAL)
    return EXIT_OK if ok else EXIT_NUMERICAL


HANDLERS = {
    "validate": cmd_validate,
    "spectrum": cmd_spectrum,
    "lopatinskii": cmd_lopatinskii,
    "green-spatial": cmd_green_spatial,
    "green-temporal": cmd_green_temporal,
    "residue": cmd_residue,
    "certify": cmd_certify,
    "power-bound": cmd_power_bound,
    "example-lf": cmd_example_lf,
}


def run(cfg: RunConfig) -> int:
    rep = Reporter(cfg.command, cfg.stream)
    try:
        cfg.check()
        sch = None if cfg.command == "example-lf" else _load(cfg)
        return HANDLERS[cfg.command](cfg, sch, rep)
    except AssumptionError as exc:
        rep.emit(error="assumption", message=str(exc), exit=EXIT_ASSUMPTION)
        return EXIT_ASSUMPTION
    except (NumericalError, FdstabError) as exc:
        rep.emit(error="numerical", kind=type(exc).__name__, message=str(exc), exit=EXIT_NUMERICAL)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        if isinstance(exc, OSError):
            rep.emit(error="io", message=str(exc), exit=EXIT_NUMERICAL)
            return EXIT_NUMERICAL
        rep.emit(error="usage", message=str(exc), exit=EXIT_ASSUMPTION)
        return EXIT_ASSUMPTION


def _complex(text: str) -> complex:
    return complex(text.replace(" ", "").replace("i", "j"))


def _int_list(text: str) -> Tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fdstab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", nargs="?", help="scheme file (YAML or JSON)")
    ap.add_argument("--builtin", action="store_true", help="use the built-in surface-wave Lax-Friedrichs scheme")
    ap.add_argument("--out", default="fdstab-out", help="output directory for CSV/SVG")
    ap.add_argument("--j0", type=int, help="source index")
    ap.add_argument("--n-max", type=int, help="largest step count")
    ap.add_argument("--n-list", type=_int_list, default=(), help="comma separated step counts")
    ap.add_argument("--window", type=int, help="truncation index J")
    ap.add_argument("--rho", type=float, default=1.2, help="contour radius (> 1)")
    ap.add_argument("--nodes", type=int, default=512, help="contour nodes (power of two >= 256)")
    ap.add_argument("--tol", type=float, default=1e-8, help="classification / root tolerance")
    ap.add_argument("--seed", type=int, default=0, help="seed for random probe inputs")
    ap.add_argument("--z", type=_complex, default=1.5, help="resolvent point, e.g. 1.5 or 1+0.04j")
    ap.add_argument("--n-theta", type=int, default=4096, help="circle samples for root scans")
    ap.add_argument("--trials", type=int, default=16, help="random probe inputs")
    ap.add_argument("--allow", action="append", default=[], metavar="CHECK",
                    help="treat the named validation check as a warning (repeatable)")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(args.command, args.config, args.builtin, args.out, args.j0, args.n_max, args.window,
                    args.rho, args.nodes, args.tol, args.seed, args.z, args.n_theta, args.trials,
                    args.n_list, tuple(args.allow))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
