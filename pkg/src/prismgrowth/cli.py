"""Command-line entry point.

Exit codes: 0 completed, 3 extinct, 1 error (including failed verifications),
2 usage errors (argparse).
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import config as config_mod
from .energy import crystalline_curvature, curvature_oracle
from .errors import PrismGrowthError

EXIT_COMPLETED, EXIT_ERROR, EXIT_EXTINCT = 0, 1, 3


def _printer(quiet):
    return (lambda *a, **k: None) if quiet else print


def _load(args):
    cfg = config_mod.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_run(args) -> int:
    from .sim import run

    cfg = _load(args)
    out = _printer(args.quiet)
    res = run(cfg, output_dir=args.output_dir, log=out)
    if res.status == "completed":
        return EXIT_COMPLETED
    if res.status == "extinct":
        out(f"extinction at t = {res.extinction_time:.6g}")
        return EXIT_EXTINCT
    print(res.message, file=sys.stderr)
    return EXIT_ERROR


def cmd_curvature(args) -> int:
    cfg = _load(args)
    out = _printer(args.quiet)
    state, aniso = cfg.initial_state(), cfg.aniso()
    rep = crystalline_curvature(state, aniso)
    out(f"{'facet':>6} {'kappa':>22} {'oracle':>22} {'rel.err':>10}")
    worst = 0.0
    for i, k in enumerate(rep.kappa):
        o = curvature_oracle(state, aniso, i)
        err = abs(k - o) / max(abs(o), 1e-300)
        worst = max(worst, err)
        out(f"{i:>6d} {k:>22.15g} {o:>22.15g} {err:>10.2e}")
    out(f"energy {rep.energy:.15g}  volume {rep.volume:.15g}  max rel.err {worst:.2e}")
    return EXIT_COMPLETED if worst <= 1e-6 else EXIT_ERROR


def _report(checks, out) -> int:
    ok = True
    for name, passed in checks.items():
        out(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok &= bool(passed)
    return EXIT_COMPLETED if ok else EXIT_ERROR


def _sample_z(cfg, rng, amplitude):
    state = cfg.initial_state()
    return rng.uniform(-amplitude, amplitude, state.n_facets) * state.base.inradius


def cmd_map_verify(args) -> int:
    from .mapping import verify_mapping

    cfg = _load(args)
    out = _printer(args.quiet)
    rng = np.random.default_rng(cfg.seed)
    z = _sample_z(cfg, rng, args.amplitude)
    rep = verify_mapping(cfg.base(), z, cfg.mapping_config(), rng=rng)
    out(f"z = {np.array2string(z, precision=4)}")
    out(f"J in [{rep.jacobian_min:.4f}, {rep.jacobian_max:.4f}]")
    return _report(rep.checks(), out)


def cmd_extend_verify(args) -> int:
    from .extension import verify_extensions

    cfg = _load(args)
    out = _printer(args.quiet)
    rng = np.random.default_rng(cfg.seed)
    rep = verify_extensions(cfg.initial_state(), cfg.extension.eps_cut, rng=rng)
    out(f"max |d h_i/d n_j - delta_ij| = {rep.max_kronecker_error:.3e} on {rep.n_points} points")
    return _report(rep.checks(), out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prismgrowth", description="Faceted prism crystal growth simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="YAML configuration file")
    common.add_argument("--output-dir", default=None, help="override output.directory")
    common.add_argument("--seed", type=int, default=None, help="seed for sampled verifications")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run a simulation").set_defaults(fn=cmd_run)
    sub.add_parser("curvature", parents=[common], help="curvature table with oracle comparison").set_defaults(
        fn=cmd_curvature
    )
    mv = sub.add_parser("map-verify", parents=[common], help="check the exterior-domain map family")
    mv.add_argument("--amplitude", type=float, default=0.05, help="max |z| as a fraction of the in-radius")
    mv.set_defaults(fn=cmd_map_verify)
    sub.add_parser("extend-verify", parents=[common], help="check the boundary extension functions").set_defaults(
        fn=cmd_extend_verify
    )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (PrismGrowthError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
