"""
nedlin command line: certify, spectrum, lyapunov, linearize, verify, pipeline.

Artifacts go to ``--out``; diagnostics go to stderr and stdout carries a
single summary line. Exit codes: 0 done, 2 usage or unreadable input,
3 not certifiable or undecidable, 4 contraction ratio K L_f / alpha >= 1,
1 anything else.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from nedlin.cli.config import (
    CertificateBundle,
    ConfigError,
    RunConfig,
    load_certificate,
    load_perturbation,
    load_system,
    load_transform,
    log_level,
    parse_params,
)
from nedlin.cli.io import format_float, read_points, sample_points, write_csv, write_json
from nedlin.dichotomy.certificates import NotCertifiableError, check_coefficient_bound, fit_bounded_growth, fit_contraction
from nedlin.dichotomy.spectrum import UndecidableError, estimate_spectrum
from nedlin.flow import CatalogError, LinearSystem, NonlinearPerturbation, check_perturbation, solve_perturbed
from nedlin.kinematics.transform import (
    KinematicTransform,
    check_metadata,
    transform_linear,
    transform_nonlinearity,
    verify_conjugacy,
    verify_lipschitz_transfer,
)
from nedlin.linearization.batch import map_points
from nedlin.linearization.crossing import verify_crossing_equivalence
from nedlin.linearization.picard import ContractionRatioError, verify_pl_equivalence
from nedlin.linearization.registry import default_registry
from nedlin.lyapunov.base import LyapunovEvaluator
from nedlin.lyapunov.quadratic import QuadraticLyapunov, build_quadratic
from nedlin.lyapunov.strict import build_strict
from nedlin.lyapunov.verify import verify_axioms, verify_decay_perturbed, verify_quadratic_identity
from nedlin.primitives.models import ContractionCertificate, Report, SampleSpec

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_NOT_CERTIFIABLE, EXIT_CONTRACTION = 0, 1, 2, 3, 4


class Inputs:
    """Parsed input files of one run, shared by the pipeline stages."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.system: LinearSystem = load_system(cfg)
        self.perturbation: NonlinearPerturbation = load_perturbation(cfg, self.system.dim)
        self.transform: Optional[KinematicTransform] = load_transform(cfg, self.system.dim)
        self.cert: Optional[ContractionCertificate] = load_certificate(cfg)
        self.lyapunov: Optional[LyapunovEvaluator] = None

    def certificate(self) -> ContractionCertificate:
        if self.cert is None:
            cfg = self.cfg
            self.cert = fit_contraction(self.system, cfg.t_max, cfg.samples, mu_cap=cfg.mu_cap)
        return self.cert

    def alpha_V(self) -> float:
        return self.cfg.alpha_V if self.cfg.alpha_V is not None else 0.5 * self.certificate().alpha

    def lyapunov_function(self) -> LyapunovEvaluator:
        if self.lyapunov is None:
            build = build_quadratic if self.cfg.lyapunov == "quadratic" else build_strict
            self.lyapunov = build(self.certificate(), self.system, self.alpha_V())
        return self.lyapunov


def run_certify(inputs: Inputs) -> str:
    cfg = inputs.cfg
    bundle = CertificateBundle(
        contraction=inputs.certificate(),
        growth=fit_bounded_growth(inputs.system, cfg.t_max, cfg.samples),
        coefficient_bound=check_coefficient_bound(inputs.system, cfg.t_max),
    )
    path = write_json(cfg.out / "cert.json", bundle)
    c = bundle.contraction
    return f"certify: K={format_float(c.K)} alpha={format_float(c.alpha)} mu={format_float(c.mu)} -> {path}"


def run_spectrum(inputs: Inputs) -> str:
    cfg = inputs.cfg
    estimate = estimate_spectrum(
        inputs.system, cfg.lambda_min, cfg.lambda_max, cfg.step, cfg.t_max, cfg.samples, mu_cap=cfg.mu_cap
    )
    rows = []
    for lam, verdict in zip(estimate.lambda_grid, estimate.verdicts):
        stable = verdict.stable.alpha if verdict.stable else None
        unstable = verdict.unstable.alpha if verdict.unstable else None
        coordinates = ";".join(str(i) for i in verdict.stable_coordinates)
        rows.append((float(lam), verdict.verdict, coordinates, stable, unstable))
    write_csv(cfg.out / "spectrum.csv", ["lambda", "verdict", "stable_coordinates", "alpha_stable", "alpha_unstable"], rows)
    path = write_json(
        cfg.out / "intervals.json",
        {"intervals": estimate.intervals, "flags": estimate.flags, "caveat": estimate.caveat},
    )
    spans = [f"[{format_float(iv.lower)}, {format_float(iv.upper)}]" for iv in estimate.intervals]
    return " ".join(["spectrum:", f"{len(spans)} interval(s)", *spans, "->", str(path)])


def _lyapunov_reports(inputs: Inputs) -> dict[str, Report]:
    cfg = inputs.cfg
    V = inputs.lyapunov_function()
    spec = SampleSpec(t_max=0.5 * cfg.t_max, seed=cfg.seed)
    reports = {"axioms": verify_axioms(V, inputs.system, spec)}
    if isinstance(V, QuadraticLyapunov):
        reports["identity"] = verify_quadratic_identity(V)
    return reports


def run_lyapunov(inputs: Inputs) -> str:
    cfg = inputs.cfg
    reports = _lyapunov_reports(inputs)
    V = inputs.lyapunov_function()
    path = write_json(cfg.out / "lyapunov.json", {"summary": V.summary(), "reports": reports})
    status = "pass" if all(r.status == "pass" for r in reports.values()) else "fail"
    return f"lyapunov: {cfg.lyapunov} alpha_V={format_float(inputs.alpha_V())} {status} -> {path}"


def _linearized_setting(inputs: Inputs) -> tuple[LinearSystem, NonlinearPerturbation, ContractionCertificate]:
    """System, perturbation and certificate in the coordinates the maps are built in."""
    cfg = inputs.cfg
    if inputs.transform is None:
        return inputs.system, inputs.perturbation, inputs.certificate()
    T = inputs.transform
    lin = transform_linear(inputs.system, T, cfg.t_max)
    pert = transform_nonlinearity(inputs.perturbation, T, cfg.t_max)
    logger.info("[CLI] maps are built in the transformed coordinates y = S^-1(t) x")
    return lin, pert, fit_contraction(lin, cfg.t_max, cfg.samples, mu_cap=cfg.mu_cap)


def run_linearize(inputs: Inputs) -> str:
    cfg = inputs.cfg
    lin, pert, cert = _linearized_setting(inputs)
    if cfg.method == "crossing":
        options: dict = {"lyapunov": cfg.lyapunov}
        if cfg.alpha_V is not None:
            options["alpha_V"] = cfg.alpha_V
        if inputs.transform is None and inputs.lyapunov is not None:
            options["V"] = inputs.lyapunov
    else:
        options = {"tol": cfg.tol}
    hom = default_registry().build(cfg.method, lin, pert, cert, options)
    points = read_points(cfg.points, lin.dim) if cfg.points else sample_points(cfg.n_points, lin.dim, cfg.t_max, cfg.seed)
    results = asyncio.run(map_points(hom, points))

    n = lin.dim
    keys = sorted({k for r in results for k in r.diagnostics})
    header = ["tau", *[f"xi{i + 1}" for i in range(n)], *[f"H{i + 1}" for i in range(n)], *keys, "error"]
    rows = [
        (r.point.tau, *r.point.xi, *r.value, *[r.diagnostics.get(k) for k in keys], r.error)
        for r in results
    ]
    write_csv(cfg.out / "points.csv", header, rows)

    mapped = [r.point for r in results if r.error is None]
    subset = mapped[: cfg.verify_points]
    if cfg.method == "crossing":
        report = verify_crossing_equivalence(hom, subset)
    else:
        report = verify_pl_equivalence(hom, subset)
    path = write_json(cfg.out / "verification.json", report)
    return f"linearize: {cfg.method} mapped {len(mapped)}/{len(results)} point(s), verification {report.status} -> {path}"


def _decay_report(inputs: Inputs) -> Report:
    cfg = inputs.cfg
    pert, V = inputs.perturbation, inputs.lyapunov_function()
    rates = (V.gamma, V.summary().upsilon)
    skipped = Report(subject="decay along the perturbed flow")
    if pert.class_tag != "A2" or pert.L_f >= rates[0] - rates[1]:
        skipped.notes.append(
            f"decay check skipped: needs class A2 and L_g < {format_float(rates[0] - rates[1])} "
            f"(class {pert.class_tag}, L_g = {format_float(pert.L_f)})"
        )
        return skipped
    x0 = np.ones(inputs.system.dim)
    traj = solve_perturbed(inputs.system, pert, 0.0, x0, min(0.5 * cfg.t_max, 10.0), tol=1e-11)
    return verify_decay_perturbed(V, inputs.system, pert, traj, rates)


def run_verify(inputs: Inputs) -> str:
    cfg = inputs.cfg
    spec = SampleSpec(t_max=0.5 * cfg.t_max, seed=cfg.seed)
    reports: dict[str, Report] = {
        "perturbation": check_perturbation(inputs.perturbation, cfg.t_max, seed=cfg.seed),
        **_lyapunov_reports(inputs),
        "decay": _decay_report(inputs),
    }
    if inputs.transform is not None:
        T = inputs.transform
        g = transform_nonlinearity(inputs.perturbation, T, cfg.t_max)
        reports["transform_metadata"] = check_metadata(T, cfg.t_max)
        reports["conjugacy"] = verify_conjugacy(inputs.system, T, sample_spec=spec)
        reports["lipschitz_transfer"] = verify_lipschitz_transfer(g, inputs.perturbation, T, spec, cert=inputs.certificate())
    path = write_json(cfg.out / "verify.json", reports)
    failed = sorted(name for name, r in reports.items() if r.status == "fail")
    status = "pass" if not failed else f"fail ({', '.join(failed)})"
    return f"verify: {len(reports)} report(s) {status} -> {path}"


def run_pipeline(inputs: Inputs) -> str:
    lines = [run_certify(inputs), run_spectrum(inputs), run_lyapunov(inputs), run_linearize(inputs), run_verify(inputs)]
    for line in lines:
        logger.info(f"[CLI] {line}")
    return f"pipeline: 5 stage(s) done -> {inputs.cfg.out}"


COMMANDS = {
    "certify": run_certify,
    "spectrum": run_spectrum,
    "lyapunov": run_lyapunov,
    "linearize": run_linearize,
    "verify": run_verify,
    "pipeline": run_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nedlin", description="Nonuniform contraction and linearization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", required=True, help="System JSON file or catalog:<name>")
    common.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="Catalog parameter (repeatable)")
    common.add_argument("--perturbation", type=Path, help="Perturbation JSON file (f = 0 when absent)")
    common.add_argument("--transform", type=Path, help="Kinematic transform JSON file")
    common.add_argument("--cert", type=Path, help="cert.json from 'certify'")
    common.add_argument("--t-max", type=float, default=20.0, help="Window end")
    common.add_argument("--samples", type=int, default=40, help="Initial times of the certificate grid")
    common.add_argument("--mu-cap", type=float, help="Cap on the nonuniformity rate")
    common.add_argument("--tol", type=float, default=1e-8, help="Tolerance of the Picard iteration")
    common.add_argument("--seed", type=int, default=0, help="Seed for sampled points and states")
    common.add_argument("--out", type=Path, default=Path("out"), help="Output directory")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")

    scan = argparse.ArgumentParser(add_help=False)
    scan.add_argument("--lambda-min", type=float, default=-5.0)
    scan.add_argument("--lambda-max", type=float, default=5.0)
    scan.add_argument("--step", type=float, default=0.05)

    lyap = argparse.ArgumentParser(add_help=False)
    lyap.add_argument("--lyapunov", choices=["quadratic", "strict"], default="quadratic")
    lyap.add_argument("--alpha-V", dest="alpha_V", type=float, help="Weight rate of V (default alpha / 2)")

    maps = argparse.ArgumentParser(add_help=False)
    maps.add_argument("--method", choices=["crossing", "picard"], default="picard")
    maps.add_argument("--points", type=Path, help="CSV of base points: tau, xi1, ..., xin")
    maps.add_argument("--n-points", type=int, default=20, help="Sampled base points when --points is absent")
    maps.add_argument("--verify-points", type=int, default=3, help="Base points checked by the residual suite")

    sub.add_parser("certify", parents=[common], help="Fit contraction and growth certificates")
    sub.add_parser("spectrum", parents=[common, scan], help="Scan shifts for the dichotomy spectrum")
    sub.add_parser("lyapunov", parents=[common, lyap], help="Build and check a Lyapunov function")
    sub.add_parser("linearize", parents=[common, lyap, maps], help="Evaluate H on base points")
    sub.add_parser("verify", parents=[common, lyap], help="Run the verification reports")
    sub.add_parser("pipeline", parents=[common, scan, lyap, maps], help="certify, spectrum, lyapunov, linearize, verify")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {
        key: value
        for key, value in vars(args).items()
        if key not in ("param", "verbose") and value is not None
    }
    return RunConfig(params=parse_params(args.param), **values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        stream=sys.stderr,
        level=log_level(args.verbose),
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    try:
        cfg = config_from_args(args)
        inputs = Inputs(cfg)
    except (ConfigError, ValidationError, CatalogError, ValueError, OSError) as exc:
        print(f"nedlin: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        summary = COMMANDS[cfg.command](inputs)
    except (ConfigError, ValidationError, CatalogError) as exc:
        print(f"nedlin: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotCertifiableError, UndecidableError) as exc:
        print(f"nedlin: {exc}", file=sys.stderr)
        return EXIT_NOT_CERTIFIABLE
    except ContractionRatioError as exc:
        print(f"nedlin: {exc}", file=sys.stderr)
        return EXIT_CONTRACTION
    except Exception as exc:
        logger.debug("[CLI] failure", exc_info=True)
        print(f"nedlin: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
