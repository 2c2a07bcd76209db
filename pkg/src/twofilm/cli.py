"""Command-line entry point for runs, sweeps, studies, and validations.

Exit codes: 0 on success, 1 when a checked property fails (a run aborts,
a scaling slope comes out too shallow, a closure or kernel violates its
contract), 2 on usage errors (missing or malformed config, bad flags).

Relative output directories are resolved under $TWOFILM_OUT_ROOT when that
variable is set, so batch jobs can redirect every artifact tree at once.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .closures import validate_closure
from .diagnostics import kernel_by_name, kernel_check, mollifier_lemma_check
from .scenarios import (ScenarioConfig, dispersion_study, reduction_thinfilm,
                        resume, run, sweep_eps, sweep_n)

_USAGE_ERROR = 2
_CHECK_FAILED = 1


def _resolve_out(path_str: str) -> Path:
    path = Path(path_str)
    root = os.environ.get("TWOFILM_OUT_ROOT")
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _load_config(path_str: str) -> ScenarioConfig:
    path = Path(path_str)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        return ScenarioConfig.from_file(path)
    except ValueError as exc:
        raise UsageError(f"malformed config {path}: {exc}") from exc


class UsageError(Exception):
    pass


def _floats(text: str):
    return [float(tok) for tok in text.split(",") if tok]


def _ints(text: str):
    return [int(tok) for tok in text.split(",") if tok]


# ---------------------------------------------------------------------------
# subcommand handlers (return exit codes)


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    out = _resolve_out(args.out or config.out)
    art = run(config, out)
    last = art.records[-1]
    print(f"run: {len(art.records)} samples -> {out}")
    print(f"  t = {last.t:.6g}  energy = {last.energy:.9g}  "
          f"residual = {last.energy_residual:.3e}")
    print(f"  min f = {last.min_f:.3e}  min g = {last.min_g:.3e}  "
          f"min gamma = {last.min_gamma:.3e}")
    if art.failed:
        print(f"FAIL integration aborted: {art.failure['message']}")
        return _CHECK_FAILED
    return 0


def _cmd_resume(args) -> int:
    ck = Path(args.checkpoint)
    if not ck.is_file():
        raise UsageError(f"checkpoint not found: {ck}")
    out = _resolve_out(args.out) if args.out else None
    art = resume(ck, out)
    print(f"resume: {len(art.records)} samples -> {art.out_dir}")
    if art.failed:
        print(f"FAIL integration aborted: {art.failure['message']}")
        return _CHECK_FAILED
    return 0


def _cmd_sweep_eps(args) -> int:
    config = _load_config(args.config)
    out = _resolve_out(args.out or config.out)
    report = sweep_eps(config, _floats(args.eps), out, jobs=args.jobs)
    slope = report.slope
    print(f"sweep-eps: eps = {report.eps} -> {out}")
    for e, chi, mg in zip(report.eps, report.chi_max, report.min_gamma):
        print(f"  eps = {e:<8g} max chi = {chi:.6e}  min gamma = {mg:.3e}")
    print(f"  slope = {'n/a' if slope is None else f'{slope:.4f}'}  "
          f"monotone = {report.monotone}")
    status = 0
    if report.partial:
        print("FAIL some sweep members aborted")
        status = _CHECK_FAILED
    if slope is None or slope < args.min_slope:
        print(f"FAIL scaling slope below {args.min_slope}")
        status = _CHECK_FAILED
    if not report.monotone:
        print("FAIL chi functional not monotone in eps")
        status = _CHECK_FAILED
    if status == 0:
        print("PASS scaling criteria met")
    return status


def _cmd_sweep_n(args) -> int:
    config = _load_config(args.config)
    out = _resolve_out(args.out or config.out)
    report = sweep_n(config, _ints(args.n), out,
                     oversample_list=_floats(args.oversample) if args.oversample else None,
                     rel_tol_list=_floats(args.rel_tol) if args.rel_tol else None,
                     jobs=args.jobs)
    print(f"sweep-n: n = {report.n} -> {out}")
    print(f"  pairwise sup distances: {['%.3e' % d for d in report.pairwise_sup]}")
    print(f"  energy residuals:       {['%.3e' % r for r in report.energy_residuals]}")
    ok = report.distances_decrease and report.residuals_decrease and not report.partial
    print("PASS refinement improves both metrics" if ok
          else "FAIL refinement did not improve monotonically")
    return 0 if ok else _CHECK_FAILED


def _cmd_reduce(args) -> int:
    config = _load_config(args.config)
    out = _resolve_out(args.out or config.out)
    report = reduction_thinfilm(config, out)
    print(f"reduce-thinfilm -> {out}")
    print(f"  final relative sup distance = {report.final_rel_sup:.3e}")
    print(f"  max |gamma - gamma0| = {report.gamma_max_dev:.3e}  "
          f"max |g - g0| = {report.g_max_dev:.3e}")
    ok = not report.partial and report.final_rel_sup <= args.tol
    print(f"PASS reduction within {args.tol:g}" if ok
          else f"FAIL reduction distance above {args.tol:g}")
    return 0 if ok else _CHECK_FAILED


def _cmd_dispersion(args) -> int:
    config = _load_config(args.config)
    out = _resolve_out(args.out or config.out)
    report = dispersion_study(config, _ints(args.modes), args.amplitude, out)
    print(f"dispersion -> {out}")
    for k, lam, err in zip(report.modes, report.eigenvalues, report.rel_errors):
        print(f"  k = {k}: eigenvalue = {lam:.6g}  max rel error = {err:.3e}")
    ok = not report.partial and report.max_rel_error <= args.tol
    print(f"PASS rates match within {args.tol:g}" if ok
          else f"FAIL modal rates off by more than {args.tol:g}")
    return 0 if ok else _CHECK_FAILED


def _cmd_validate_closure(args) -> int:
    from .closures import quadratic_closure

    if args.closure != "quadratic":
        raise UsageError(f"unknown closure {args.closure!r}")
    closure = quadratic_closure(args.beta)
    report = validate_closure(closure)
    print(f"closure '{closure.name}': pairing defect = {report.pairing_defect:.3e}, "
          f"convexity margin = {report.convexity_margin:.3e}")
    for msg in report.messages:
        print(f"  FAIL {msg}")
    if report.ok:
        print("PASS closure contract satisfied")
    return 0 if report.ok else _CHECK_FAILED


def _cmd_check_mollifier(args) -> int:
    kernel = kernel_by_name(args.kernel)
    krep = kernel_check(kernel)
    print(f"kernel '{kernel.name}': mass defect = {krep.psi_mass_defect:.3e}, "
          f"sup = {kernel.psi_sup:.6g}")
    ok = krep.ok
    rng = np.random.default_rng(args.seed)
    for delta in _floats(args.deltas):
        span = max(3.0, 3.0 * delta)
        samples = np.concatenate([
            rng.uniform(-span, span, args.samples // 2),
            rng.uniform(-2.0 * delta, delta, args.samples - args.samples // 2),
            [-delta, -delta / 2, 0.0, delta],
        ])
        rep = mollifier_lemma_check(kernel, delta, samples)
        print(f"  delta = {delta:<8g} worst violation = {rep.worst:.3e} "
              f"({'ok' if rep.ok else 'FAIL'})")
        ok = ok and rep.ok
    print("PASS mollifier bounds hold" if ok else "FAIL mollifier bounds violated")
    return 0 if ok else _CHECK_FAILED


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twofilm",
        description="Two-phase thin-film flow with insoluble surfactant: "
                    "spectral simulation runs, sweeps, and validations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="scenario config file")
        p.add_argument("--out", default=None, help="output directory override")

    p = sub.add_parser("run", help="integrate one scenario")
    add_common(p)
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("resume", help="continue a run from its checkpoint")
    p.add_argument("--checkpoint", required=True, help="checkpoint.json path")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_resume)

    p = sub.add_parser("sweep-eps", help="regularization continuation sweep")
    add_common(p)
    p.add_argument("--eps", default="1e-1,1e-2,1e-3,1e-4",
                   help="comma-separated decreasing eps ladder")
    p.add_argument("--min-slope", type=float, default=0.9)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(handler=_cmd_sweep_eps)

    p = sub.add_parser("sweep-n", help="resolution refinement sweep")
    add_common(p)
    p.add_argument("--n", default="8,16,32", help="increasing basis orders")
    p.add_argument("--oversample", default=None,
                   help="optional per-member quadrature oversampling ladder")
    p.add_argument("--rel-tol", default=None,
                   help="optional per-member relative-tolerance ladder")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(handler=_cmd_sweep_n)

    p = sub.add_parser("reduce-thinfilm",
                       help="mu = 0 comparison against the lone-film solver")
    add_common(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(handler=_cmd_reduce)

    p = sub.add_parser("dispersion", help="modal decay rates vs linearization")
    add_common(p)
    p.add_argument("--modes", default="1,2,3,4")
    p.add_argument("--amplitude", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=0.02)
    p.set_defaults(handler=_cmd_dispersion)

    p = sub.add_parser("validate-closure", help="check a closure's contract")
    p.add_argument("--closure", default="quadratic")
    p.add_argument("--beta", type=float, default=0.5)
    p.set_defaults(handler=_cmd_validate_closure)

    p = sub.add_parser("check-mollifier", help="check the chi_delta bounds")
    p.add_argument("--kernel", default="polynomial")
    p.add_argument("--deltas", default="1,1e-1,1e-2,1e-3")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(handler=_cmd_check_mollifier)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
