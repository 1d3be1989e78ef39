"""Command-line interface.

Subcommands: sample, curve-optimal, curve-klt-bound, train, eval, sweep,
compare.  All outputs are CSV/JSON plus plain-text summaries; set the
``SAWBRIDGE_WORKERS`` environment variable to parallelize sweep points.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import __version__
from .checkpoint import load_code, save_code
from .kltcoder import (
    coder_params,
    empirical_conditional_entropy,
    empirical_distortion,
    separate_coding_rate,
)
from .optimal import entropy_distortion, lce_entropy_distortion
from .sweep import (
    ANALYTIC_FAMILIES,
    TRAINABLE_FAMILIES,
    SweepSpec,
    compare_curves,
    emit_realizations,
    format_comparison,
    make_code,
    run_sweep,
    write_comparison_csv,
)

_ESTIMATOR_KEYS = {
    "lam", "latent_dims", "grid_size", "hidden", "analysis_depth",
    "synthesis_depth", "alpha", "support", "steps", "batch_size",
    "learning_rate", "logit_lr_scale", "seed", "init_logit_slope",
    "init_scale", "eval_every",
}


def _parse_grid(text: str) -> tuple:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ValueError(f"bad grid {text!r}: {exc}") from exc
    if not values:
        raise ValueError("grid must contain at least one value")
    return values


def _parse_kv_file(path: str) -> dict:
    """Parse a flat 'key = value' training config file."""
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (p.strip() for p in line.split("=", 1))
            if key not in _ESTIMATOR_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                value: object = int(raw)
            except ValueError:
                try:
                    value = float(raw)
                except ValueError:
                    value = raw
            out[key] = value
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=1024, help="grid size (default 1024)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sawbridge",
        description="Entropy-distortion experiments for the sawbridge source",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="write source realizations as CSV rows (u, values)")
    _add_common(p)
    p.add_argument("--count", type=int, default=8, help="number of realizations")
    p.add_argument("--out", required=True)

    p = sub.add_parser("curve-optimal", help="exact tradeoff curve and its envelope")
    p.add_argument("--delta-grid", type=_parse_grid, default=None,
                   help="comma-separated distortions (default: 200 log-spaced)")
    p.add_argument("--points", type=int, default=200, help="size of the default grid")
    p.add_argument("--out", required=True)

    p = sub.add_parser("curve-klt-bound", help="KLT coder rate bound and empirical check")
    _add_common(p)
    p.add_argument("--delta-grid", type=_parse_grid, default=None,
                   help="comma-separated distortions (default: 10 log-spaced)")
    p.add_argument("--mc-samples", type=int, default=1_000_000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train one code and save a checkpoint")
    _add_common(p)
    p.add_argument("--family", required=True, choices=TRAINABLE_FAMILIES)
    p.add_argument("--lam", type=float, required=True, help="Lagrange multiplier")
    p.add_argument("--config", default=None, help="key = value training config file")
    p.add_argument("--checkpoint", required=True, help="output checkpoint path")
    p.add_argument("--trace", default=None, help="optional training-trace CSV path")

    p = sub.add_parser("eval", help="evaluate a checkpointed code by Monte Carlo")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mc-samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None, help="optional JSON output path")

    p = sub.add_parser("sweep", help="entropy-distortion sweep for one family")
    _add_common(p)
    p.add_argument("--family", required=True, choices=ANALYTIC_FAMILIES + TRAINABLE_FAMILIES)
    p.add_argument("--lambda-grid", type=_parse_grid, default=())
    p.add_argument("--delta-grid", type=_parse_grid, default=())
    p.add_argument("--mc-samples", type=int, default=1_000_000)
    p.add_argument("--config", default=None, help="training overrides for trainable families")
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="entropy excess of curves over a baseline (last file)")
    p.add_argument("paths", nargs="+", help="sweep CSVs; the last one is the baseline")
    p.add_argument("--out", default=None, help="optional per-point CSV output")

    return parser


def _cmd_sample(args) -> int:
    emit_realizations(args.count, args.n, args.seed, args.out)
    print(f"wrote {args.count} realizations to {args.out}")
    return 0


def _cmd_curve_optimal(args) -> int:
    grid = args.delta_grid or tuple(np.geomspace(1e-4, 1.0 / 6.0, args.points))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("delta,H_bits,lce_bits\n")
        for delta in grid:
            fh.write(
                f"{repr(float(delta))},{repr(entropy_distortion(delta))},"
                f"{repr(lce_entropy_distortion(delta))}\n"
            )
    print(f"wrote {len(grid)} points to {args.out}")
    return 0


def _cmd_curve_klt_bound(args) -> int:
    grid = args.delta_grid or tuple(np.geomspace(1e-3, 0.15, 10))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("delta,hbar_bits,empirical_H_bits,empirical_D\n")
        for delta in grid:
            bound = separate_coding_rate(delta)
            emp_h = empirical_conditional_entropy(delta, samples=args.mc_samples, seed=args.seed)
            emp_d, _ = empirical_distortion(
                delta, samples=min(args.mc_samples, 200_000), n=args.n, seed=args.seed
            )
            fh.write(f"{repr(float(delta))},{repr(bound)},{repr(emp_h)},{repr(emp_d)}\n")
    print(f"wrote {len(grid)} points to {args.out}")
    return 0


def _cmd_train(args) -> int:
    overrides = _parse_kv_file(args.config) if args.config else {}
    overrides.pop("lam", None)
    overrides.pop("seed", None)
    overrides.pop("grid_size", None)
    code = make_code(args.family, args.lam, args.n, args.seed, overrides)
    code.fit()
    save_code(code, args.checkpoint)
    if args.trace:
        code.trace_.write_csv(args.trace)
    last = code.trace_
    print(
        f"trained {args.family} (lam={args.lam}): final entropy "
        f"{last.entropy_bits[-1]:.4f} bits, distortion {last.distortion[-1]:.6f}, "
        f"converged={code.converged_}; checkpoint at {args.checkpoint}"
    )
    return 0


def _cmd_eval(args) -> int:
    code = load_code(args.checkpoint)
    result = code.evaluate(n_samples=args.mc_samples, seed=args.seed)
    payload = dataclasses.asdict(result)
    payload["family"] = code.family_tag()
    payload["active_dims"] = code.active_dimensions(seed=args.seed)
    print(
        f"{payload['family']}: entropy {result.entropy_bits:.4f} bits, "
        f"distortion {result.distortion:.6f} "
        f"({result.n_samples} samples, {result.clamp_count} clamped, "
        f"{payload['active_dims']} active dims)"
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_sweep(args) -> int:
    overrides = _parse_kv_file(args.config) if args.config else {}
    spec = SweepSpec(
        family=args.family,
        lambdas=args.lambda_grid,
        deltas=args.delta_grid,
        samples=args.mc_samples,
        seed=args.seed,
        n=args.n,
        out=args.out,
        train_overrides=overrides,
    )
    result = run_sweep(spec)
    print(f"swept {len(result.points)} {args.family} points into {args.out}")
    return 0


def _cmd_compare(args) -> int:
    report = compare_curves(args.paths)
    print(format_comparison(report))
    if args.out:
        write_comparison_csv(report, args.out)
    return 0


_COMMANDS = {
    "sample": _cmd_sample,
    "curve-optimal": _cmd_curve_optimal,
    "curve-klt-bound": _cmd_curve_klt_bound,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
