"""Command-line entry point.

Subcommands: validate, beta-map, generator-check, simulate-exit,
decay-experiment, reduction-check.  Every run writes its outputs plus a
manifest (resolved config, seed, timestamps, sha256 digests) into one
directory; re-running with the manifest's config and seed reproduces the
output files byte for byte.

Exit codes: 0 success, 1 validation failure, 2 numeric failure,
3 inconclusive experiment, 64 usage error.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import BudgetExceeded, ExperimentInconclusive, NumericFailure
from .generator import GeneratorQuad, GaussianBump, apply_generator, g_boundedness_scan
from .geometry import DomainGeometry
from .montecarlo import PathConfig, sample_exits
from .projection import QuadConfig, beta_bounds, c_plus_batch
from .rng import RngSpec
from .experiments import run_decay_experiment, run_reduction_check, reduction_tightening
from .spectral import StableSpec, validate_spec
from ._sphere import direction_grid

USAGE_ERROR = 64


def fmt(x) -> str:
    """Full round-trip decimal representation (17 significant digits)."""
    return format(float(x), ".17g")


def _load_spec(path) -> StableSpec:
    with open(path) as fh:
        return StableSpec.from_dict(json.load(fh))


def _load_domain(path) -> DomainGeometry:
    with open(path) as fh:
        return DomainGeometry.from_dict(json.load(fh))


def _parse_point(text) -> np.ndarray:
    return np.array([float(p) for p in text.split(",")], dtype=float)


def _spec_hash(spec: StableSpec) -> str:
    blob = json.dumps(spec.theta.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


class RunDir:
    """Output directory with a reproducibility manifest."""

    def __init__(self, out, config):
        self.out = out
        os.makedirs(out, exist_ok=True)
        self.config = config
        self.started = datetime.now(timezone.utc).isoformat()
        self.outputs = {}

    def path(self, name):
        return os.path.join(self.out, name)

    def write_text(self, name, text):
        with open(self.path(name), "w") as fh:
            fh.write(text)
        digest = hashlib.sha256(text.encode()).hexdigest()
        self.outputs[name] = digest

    def write_json(self, name, obj):
        self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def finish(self):
        manifest = {
            "tool_version": __version__,
            "resolved_config": self.config,
            "seed": self.config.get("seed"),
            "started_at": self.started,
            "finished_at": datetime.now(timezone.utc).isoformat(),
            "outputs": self.outputs,
        }
        with open(self.path("manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _add_common(p):
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count(),
                   help="worker cap for ensemble chunks (results do not depend on it)")
    p.add_argument("--quiet", action="store_true")


def cmd_validate(args):
    spec = _load_spec(args.spec)
    report = validate_spec(spec)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.out:
        rd = RunDir(args.out, {"subcommand": "validate", "spec": spec.to_dict(), "seed": None})
        rd.write_text("result.json", text + "\n")
        rd.finish()
    if not args.quiet:
        print(text)
    for c in report.failures():
        print(f"FAIL {c.name}: {c.detail}", file=sys.stderr)
    return 0 if report.ok else 1


def cmd_beta_map(args):
    spec = _load_spec(args.spec)
    quad = QuadConfig(tol=args.tol)
    n = args.dirs
    U = direction_grid(spec.dim, n)
    cp, errp = c_plus_batch(spec, U, quad)
    cm, errm = c_plus_batch(spec, -U, quad)
    if spec.alpha == 1.0:
        betas = 0.5 + np.arctan((U @ spec.drift()) / (np.pi * cp)) / np.pi
    else:
        q = (cp - cm) / (cp + cm)
        betas = spec.alpha / 2 + np.arctan(q * np.tan(np.pi * spec.alpha / 2)) / np.pi
    h = _spec_hash(spec)
    cols = [f"u{i}" for i in range(spec.dim)]
    lines = ["theta_param_hash,alpha," + ",".join(cols) + ",c_plus,c_minus,beta,quad_err"]
    for i in range(n):
        row = [h, fmt(spec.alpha)] + [fmt(v) for v in U[i]] \
            + [fmt(cp[i]), fmt(cm[i]), fmt(betas[i]), fmt(max(errp[i], errm[i]))]
        lines.append(",".join(row))
    csv = "\n".join(lines) + "\n"
    imin, imax = int(np.argmin(betas)), int(np.argmax(betas))
    summary = {"beta_min": betas[imin], "beta_max": betas[imax],
               "argmin_u": U[imin].tolist(), "argmax_u": U[imax].tolist(),
               "n_dirs": n}
    rd = RunDir(args.out or "beta-map-out",
                {"subcommand": "beta-map", "spec": spec.to_dict(), "dirs": n,
                 "tol": args.tol, "seed": None})
    rd.write_text("beta_map.csv", csv)
    rd.write_json("result.json", summary)
    rd.finish()
    if not args.quiet:
        print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_generator_check(args):
    spec = _load_spec(args.spec)
    quad = GeneratorQuad(tol=args.tol)
    pts = [_parse_point(p) for p in args.points.split(";")]
    f = GaussianBump(np.zeros(spec.dim), 1.0, 1.0)
    rows = []
    code = 0
    for x in pts:
        try:
            v, e = apply_generator(spec, f, x, quad)
        except NumericFailure as exc:
            v, e = exc.value, exc.err_estimate
            code = 2
        rows.append((x, v, e))
    cols = [f"x{i}" for i in range(spec.dim)]
    lines = [",".join(cols) + ",value,err_estimate"]
    for x, v, e in rows:
        lines.append(",".join([fmt(c) for c in x] + [fmt(v), fmt(e)]))
    rd = RunDir(args.out or "generator-check-out",
                {"subcommand": "generator-check", "spec": spec.to_dict(),
                 "points": args.points, "tol": args.tol, "seed": None})
    rd.write_text("generator_check.csv", "\n".join(lines) + "\n")
    rd.finish()
    if not args.quiet:
        print("\n".join(lines))
    return code


def cmd_simulate_exit(args):
    spec = _load_spec(args.spec)
    dom = _load_domain(args.domain)
    x0 = _parse_point(args.x0)
    cfg = PathConfig(n_rays=args.n_rays, dt=args.dt, eps_jump=args.eps_jump)
    ens = sample_exits(spec, cfg, dom, x0[None, :], args.n, RngSpec(args.seed))
    cols = [f"exit_x{i}" for i in range(spec.dim)]
    lines = ["exit_time," + ",".join(cols) + ",exited_by"]
    for i in range(args.n):
        kind = "jump" if ens.by_jump[i, 0] else "skeleton-step"
        if not ens.completed[i, 0]:
            kind = "budget-exceeded"
        lines.append(",".join([fmt(ens.times[i, 0])]
                              + [fmt(c) for c in ens.points[i, 0]] + [kind]))
    rd = RunDir(args.out or "simulate-exit-out",
                {"subcommand": "simulate-exit", "spec": spec.to_dict(),
                 "domain": dom.to_dict(), "x0": args.x0, "n": args.n,
                 "dt": args.dt, "eps_jump": args.eps_jump,
                 "n_rays": args.n_rays, "seed": args.seed})
    rd.write_text("exits.csv", "\n".join(lines) + "\n")
    rd.finish()
    if not args.quiet:
        print(f"{args.n} exits written; jump fraction "
              f"{fmt(ens.jump_exit_fraction)}")
    return 0


def _ray_csv(report):
    lines = ["t,value,se"]
    for t, v, s in report.rays:
        lines.append(f"{fmt(t)},{fmt(v)},{fmt(s)}")
    return "\n".join(lines) + "\n"


def cmd_decay_experiment(args):
    spec = _load_spec(args.spec)
    dom = _load_domain(args.domain)
    z = _parse_point(args.z)
    cfg = PathConfig(n_rays=args.n_rays, dt=args.dt, eps_jump=args.eps_jump)
    rays = None
    if args.rays:
        rays = np.array([float(t) for t in args.rays.split(",")])
    config = {"subcommand": "decay-experiment", "spec": spec.to_dict(),
              "domain": dom.to_dict(), "z": args.z, "n": args.n,
              "dt": args.dt, "eps_jump": args.eps_jump, "n_rays": args.n_rays,
              "rays": args.rays, "seed": args.seed}
    rd = RunDir(args.out or "decay-experiment-out", config)
    try:
        report = run_decay_experiment(spec, dom, z, cfg, n_samples=args.n,
                                      rng=RngSpec(args.seed), ray_points=rays)
    except ExperimentInconclusive as exc:
        if exc.report is not None:
            rd.write_json("result.json", exc.report.to_dict())
            if args.csv:
                rd.write_text("rays.csv", _ray_csv(exc.report))
        rd.finish()
        print(f"inconclusive: {exc}", file=sys.stderr)
        return 3
    rd.write_json("result.json", report.to_dict())
    if args.csv:
        rd.write_text("rays.csv", _ray_csv(report))
    rd.finish()
    if not args.quiet:
        print(json.dumps({"predicted": report.beta_predicted,
                          "fitted": report.beta_fitted,
                          "ci": list(report.ci)}, indent=2, sort_keys=True))
    return 0


def cmd_reduction_check(args):
    spec = _load_spec(args.spec)
    dom = _load_domain(args.domain)
    z = _parse_point(args.z)
    cfg = PathConfig(n_rays=args.n_rays, dt=args.dt)
    radii = [float(r) for r in args.radii.split(",")]
    config = {"subcommand": "reduction-check", "spec": spec.to_dict(),
              "domain": dom.to_dict(), "z": args.z, "n": args.n,
              "radii": args.radii, "dt": args.dt, "n_rays": args.n_rays,
              "seed": args.seed}
    rd = RunDir(args.out or "reduction-check-out", config)
    try:
        reports = run_reduction_check(spec, dom, z, cfg, radii,
                                      n_samples=args.n, rng=RngSpec(args.seed))
    except ExperimentInconclusive as exc:
        rd.finish()
        print(f"inconclusive: {exc}", file=sys.stderr)
        return 3
    summary = {"reports": [r.to_dict() for r in reports],
               "tightening": reduction_tightening(reports)}
    rd.write_json("result.json", summary)
    rd.finish()
    if not args.quiet:
        print(json.dumps(summary["tightening"], indent=2, sort_keys=True))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="stabledecay",
                                description="stable-process boundary decay toolkit")
    sub = p.add_subparsers(dest="command")

    v = sub.add_parser("validate", help="check a process spec against the standing assumptions")
    v.add_argument("--spec", required=True)
    _add_common(v)
    v.set_defaults(fn=cmd_validate)

    b = sub.add_parser("beta-map", help="directional exponents over a direction grid")
    b.add_argument("--spec", required=True)
    b.add_argument("--dirs", type=int, default=256)
    b.add_argument("--tol", type=float, default=None)
    _add_common(b)
    b.set_defaults(fn=cmd_beta_map)

    g = sub.add_parser("generator-check", help="pointwise generator values")
    g.add_argument("--spec", required=True)
    g.add_argument("--points", required=True,
                   help="semicolon-separated points, e.g. '0,0.5;0,1'")
    g.add_argument("--tol", type=float, default=1e-7)
    _add_common(g)
    g.set_defaults(fn=cmd_generator_check)

    s = sub.add_parser("simulate-exit", help="first-exit samples")
    s.add_argument("--spec", required=True)
    s.add_argument("--domain", required=True)
    s.add_argument("--x0", required=True)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--eps-jump", dest="eps_jump", type=float, default=None)
    s.add_argument("--n-rays", dest="n_rays", type=int, default=256)
    _add_common(s)
    s.set_defaults(fn=cmd_simulate_exit)

    d = sub.add_parser("decay-experiment", help="boundary decay exponent fit")
    d.add_argument("--spec", required=True)
    d.add_argument("--domain", required=True)
    d.add_argument("--z", required=True, help="boundary point, e.g. '0,2'")
    d.add_argument("--n", type=int, default=100_000)
    d.add_argument("--dt", type=float, default=2e-4)
    d.add_argument("--eps-jump", dest="eps_jump", type=float, default=None)
    d.add_argument("--n-rays", dest="n_rays", type=int, default=256)
    d.add_argument("--rays", default=None, help="comma-separated ray distances")
    d.add_argument("--csv", action="store_true", help="also write the ray table")
    _add_common(d)
    d.set_defaults(fn=cmd_decay_experiment)

    r = sub.add_parser("reduction-check", help="harmonic reduction ratios")
    r.add_argument("--spec", required=True)
    r.add_argument("--domain", required=True)
    r.add_argument("--z", required=True)
    r.add_argument("--radii", default="0.25,0.125,0.0625")
    r.add_argument("--n", type=int, default=100_000)
    r.add_argument("--dt", type=float, default=2e-4)
    r.add_argument("--n-rays", dest="n_rays", type=int, default=256)
    _add_common(r)
    r.set_defaults(fn=cmd_reduction_check)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0,) else 0
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        return args.fn(args)
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (BudgetExceeded, ExperimentInconclusive) as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
