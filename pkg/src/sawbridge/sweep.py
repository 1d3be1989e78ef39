"""Experiment harness: curve sweeps, curve comparison, realization export.

A sweep evaluates one code family over a multiplier grid (trainable families)
or a distortion grid (analytic families) and records one entropy-distortion
point per grid value, with per-point metadata, as a CSV plus a JSON sidecar.
Outputs contain no timestamps, so reruns with the same spec are byte
identical.  Sweep points are independent; set the ``SAWBRIDGE_WORKERS``
environment variable to compute trainable points in parallel processes
(results do not depend on the worker count).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .codes import FixedOrthonormalCode, LinearCode, NeuralCode
from .kltcoder import (
    empirical_conditional_entropy,
    empirical_distortion,
    separate_coding_rate,
)
from .optimal import EntropyDistortionPoint, entropy_distortion, lce_entropy_distortion
from .process import sample_sawbridge_batch
from .rng import substream

__all__ = [
    "ANALYTIC_FAMILIES",
    "TRAINABLE_FAMILIES",
    "SweepSpec",
    "SweepResult",
    "make_code",
    "run_sweep",
    "compare_curves",
    "emit_realizations",
    "read_curve",
]

ANALYTIC_FAMILIES = ("optimal-analytic", "lce", "klt-bound", "klt-dithered-empirical")
TRAINABLE_FAMILIES = (
    "dct2",
    "daub4",
    "klt-sampled",
    "arbitrary-linear",
    "nonlinear-mlp",
    "hybrid-linear-analysis",
)

_CSV_COLUMNS = (
    "family,param_kind,param,entropy_bits,distortion,provenance,"
    "seed,n,samples,active_dims,clamp_count,converged"
)


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: a family, its grid, and the evaluation budget."""

    family: str
    lambdas: tuple = ()
    deltas: tuple = ()
    samples: int = 1_000_000
    seed: int = 0
    n: int = 1024
    out: str | None = None
    train_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        known = ANALYTIC_FAMILIES + TRAINABLE_FAMILIES
        if self.family not in known:
            raise ValueError(f"unknown family {self.family!r}; expected one of {known}")
        if self.family in TRAINABLE_FAMILIES:
            if not self.lambdas:
                raise ValueError(f"family {self.family!r} needs a nonempty lambda grid")
        elif not len(self.deltas):
            raise ValueError(f"family {self.family!r} needs a nonempty delta grid")
        if self.samples < 1:
            raise ValueError("samples must be positive")
        for name, grid in (("lambdas", self.lambdas), ("deltas", self.deltas)):
            if any(v <= 0 for v in grid):
                raise ValueError(f"{name} must be positive")


@dataclass
class SweepResult:
    spec: SweepSpec
    points: list[EntropyDistortionPoint]
    metadata: list[dict]
    version: str = __version__

    def rows(self):
        kind = "lambda" if self.spec.family in TRAINABLE_FAMILIES else "delta"
        for point, meta in zip(self.points, self.metadata):
            yield {
                "family": self.spec.family,
                "param_kind": kind,
                "param": meta["param"],
                "entropy_bits": point.entropy_bits,
                "distortion": point.distortion,
                "provenance": point.provenance,
                "seed": self.spec.seed,
                "n": self.spec.n,
                "samples": meta.get("samples", ""),
                "active_dims": meta.get("active_dims", ""),
                "clamp_count": meta.get("clamp_count", ""),
                "converged": meta.get("converged", ""),
            }

    def write(self, path: str) -> None:
        """Write the CSV and its JSON sidecar (<path>.meta.json)."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_CSV_COLUMNS + "\n")
            for row in self.rows():
                fh.write(",".join(_format_cell(row[c]) for c in _CSV_COLUMNS.split(",")) + "\n")
        sidecar = {
            "version": self.version,
            "spec": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.spec).items()},
            "points": self.metadata,
        }
        with open(path + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def make_code(family: str, lam: float, n: int, seed: int, overrides: dict | None = None):
    """Construct the estimator for a trainable family."""
    overrides = dict(overrides or {})
    if family in ("dct2", "daub4", "klt-sampled"):
        return FixedOrthonormalCode(kind=family, lam=lam, grid_size=n, seed=seed, **overrides)
    if family == "arbitrary-linear":
        return LinearCode(lam=lam, grid_size=n, seed=seed, **overrides)
    if family == "nonlinear-mlp":
        return NeuralCode(lam=lam, grid_size=n, seed=seed, **overrides)
    if family == "hybrid-linear-analysis":
        return NeuralCode(lam=lam, grid_size=n, seed=seed, analysis_depth=1, **overrides)
    raise ValueError(f"family {family!r} is not trainable")


def _trainable_point(args) -> tuple[EntropyDistortionPoint, dict]:
    family, lam, n, seed, samples, overrides = args
    code = make_code(family, lam, n, seed, overrides)
    code.fit()
    evaluation = code.evaluate(n_samples=samples, seed=seed + 1)
    meta = {
        "param": lam,
        "samples": samples,
        "active_dims": code.active_dimensions(seed=seed + 1),
        "clamp_count": evaluation.clamp_count,
        "converged": code.converged_,
        "train_config": asdict(code._train_config()),
    }
    point = EntropyDistortionPoint(
        entropy_bits=evaluation.entropy_bits,
        distortion=evaluation.distortion,
        provenance="empirical",
    )
    return point, meta


def _analytic_point(spec: SweepSpec, delta: float) -> tuple[EntropyDistortionPoint, dict]:
    meta: dict = {"param": delta}
    if spec.family == "optimal-analytic":
        point = EntropyDistortionPoint(entropy_distortion(delta), delta, "analytic")
    elif spec.family == "lce":
        point = EntropyDistortionPoint(lce_entropy_distortion(delta), delta, "lce")
    elif spec.family == "klt-bound":
        point = EntropyDistortionPoint(separate_coding_rate(delta), delta, "bound")
    else:  # klt-dithered-empirical
        dist_samples = min(spec.samples, 200_000)  # grid MSE is the costly part
        dist, stderr = empirical_distortion(delta, samples=dist_samples,
                                            n=spec.n, seed=spec.seed)
        bits = empirical_conditional_entropy(delta, samples=spec.samples, seed=spec.seed)
        point = EntropyDistortionPoint(bits, dist, "empirical")
        meta.update({
            "samples": spec.samples,
            "distortion_samples": dist_samples,
            "distortion_stderr": stderr,
        })
    return point, meta


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Evaluate every grid point of a sweep; write outputs if spec.out is set."""
    points: list[EntropyDistortionPoint] = []
    metadata: list[dict] = []
    if spec.family in TRAINABLE_FAMILIES:
        jobs = [
            (spec.family, lam, spec.n, spec.seed, spec.samples, spec.train_overrides)
            for lam in spec.lambdas
        ]
        workers = int(os.environ.get("SAWBRIDGE_WORKERS", "1"))
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_trainable_point, jobs))
        else:
            results = [_trainable_point(job) for job in jobs]
        for point, meta in results:
            points.append(point)
            metadata.append(meta)
    else:
        for delta in spec.deltas:
            point, meta = _analytic_point(spec, float(delta))
            points.append(point)
            metadata.append(meta)
    result = SweepResult(spec=spec, points=points, metadata=metadata)
    if spec.out:
        result.write(spec.out)
    return result


def read_curve(path: str) -> np.ndarray:
    """Load (distortion, entropy_bits) pairs from a sweep CSV, sorted by distortion.

    Rows flagged as non-converged are excluded; they are still present in the
    CSV and sidecar for separate reporting.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        try:
            d_col = header.index("distortion")
            h_col = header.index("entropy_bits")
        except ValueError as exc:
            raise ValueError(f"{path}: missing distortion/entropy_bits columns") from exc
        conv_col = header.index("converged") if "converged" in header else None
        rows = []
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < len(header):
                continue
            if conv_col is not None and parts[conv_col] == "0":
                continue
            rows.append((float(parts[d_col]), float(parts[h_col])))
    if not rows:
        raise ValueError(f"{path}: no usable data rows")
    curve = np.array(sorted(rows))
    return curve


def compare_curves(paths: list[str]) -> dict:
    """Align curves by distortion and report entropy excess over the baseline.

    The last path is the baseline.  Each other curve is evaluated at its own
    points restricted to the distortion overlap with the baseline, whose
    entropy there is obtained by monotone (piecewise-linear in sorted
    distortion) interpolation.
    """
    if len(paths) < 2:
        raise ValueError("need at least two curve files (last one is the baseline)")
    base = read_curve(paths[-1])
    base_lo, base_hi = base[0, 0], base[-1, 0]
    report = {"baseline": paths[-1], "curves": []}
    for path in paths[:-1]:
        curve = read_curve(path)
        lo, hi = max(curve[0, 0], base_lo), min(curve[-1, 0], base_hi)
        if lo > hi:
            raise ValueError(
                f"distortion ranges are disjoint: {path} spans "
                f"[{curve[0, 0]:g}, {curve[-1, 0]:g}] but baseline spans "
                f"[{base_lo:g}, {base_hi:g}]"
            )
        mask = (curve[:, 0] >= lo) & (curve[:, 0] <= hi)
        sel = curve[mask]
        base_bits = np.interp(sel[:, 0], base[:, 0], base[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(base_bits > 0, sel[:, 1] / base_bits, np.inf)
        report["curves"].append(
            {
                "path": path,
                "points": [
                    {
                        "distortion": float(d),
                        "entropy_bits": float(h),
                        "baseline_bits": float(b),
                        "excess_bits": float(h - b),
                        "ratio": float(r),
                    }
                    for d, h, b, r in zip(sel[:, 0], sel[:, 1], base_bits, ratio)
                ],
                "mean_excess_bits": float(np.mean(sel[:, 1] - base_bits)),
                "max_excess_bits": float(np.max(sel[:, 1] - base_bits)),
            }
        )
    return report


def format_comparison(report: dict) -> str:
    lines = [f"baseline: {report['baseline']}"]
    for curve in report["curves"]:
        lines.append(
            f"{curve['path']}: {len(curve['points'])} matched points, "
            f"mean excess {curve['mean_excess_bits']:.4f} bits, "
            f"max excess {curve['max_excess_bits']:.4f} bits"
        )
    return "\n".join(lines)


def write_comparison_csv(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("curve,distortion,entropy_bits,baseline_bits,excess_bits,ratio\n")
        for curve in report["curves"]:
            for pt in curve["points"]:
                fh.write(
                    ",".join(
                        [curve["path"]]
                        + [
                            repr(pt[k])
                            for k in ("distortion", "entropy_bits", "baseline_bits",
                                      "excess_bits", "ratio")
                        ]
                    )
                    + "\n"
                )


def emit_realizations(count: int, n: int, seed: int, path: str) -> None:
    """Write ``count`` realizations as CSV rows: u then the n grid values.

    Values use 9 significant digits; draws come from the seeded source stream.
    """
    if count < 1:
        raise ValueError("count must be positive")
    u = substream(seed, "emit-u").uniform(size=count)
    signals = sample_sawbridge_batch(u, n)
    with open(path, "w", encoding="utf-8") as fh:
        for ui, row in zip(u, signals):
            fh.write(",".join(f"{v:.9g}" for v in np.concatenate([[ui], row])) + "\n")
