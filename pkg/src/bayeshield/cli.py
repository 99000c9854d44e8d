"""Command-line interface and the on-disk formats.

Subcommands: ``estimate``, ``perturb``, ``gradcheck``, ``gen``,
``demo``. Every run can emit a JSON report that echoes the fully
resolved configuration, so any result can be reproduced from the
report alone. Exit codes: 0 success, 1 internal error or failed check,
2 user or input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from .core import (
    LabeledDataset,
    NORM_ORDERS,
    PerturbationConstraint,
    PgaConfig,
    SimilarityKernel,
)
from .embed import load_embedding
from .estimator import (
    estimate_bayes_error,
    median_heuristic_bandwidth,
)
from .perturb import (
    default_step_size,
    objective_and_gradient,
    pga_maximize,
)
from .synth import (
    MOONS_BANDWIDTH,
    analytic_bayes_error,
    canonical_truncated_normal_pair,
    finite_difference_gradient,
    generate_moons,
    sample_truncated_normal_pair,
)

DATASET_FORMAT_VERSION = 1
TRACE_FORMAT_VERSION = 1
DELTAS_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1

GRADCHECK_THRESHOLD = 1e-4

DEFAULT_DEMO_ITERS = 100

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USER = 2


class CsvFormatError(ValueError):
    """Malformed dataset or trace file; message carries line context."""


# ---------------------------------------------------------------- formats

def _format_float(value: float) -> str:
    # repr of a Python float is the shortest string that parses back to
    # the same bits, which is what makes round-trips byte-identical
    return repr(float(value))


def write_dataset_csv(path, data: LabeledDataset) -> None:
    lines = [f"# version={DATASET_FORMAT_VERSION}", f"# k={data.num_classes}"]
    lines.append(",".join([f"f{j}" for j in range(data.d)] + ["label"]))
    for row, label in zip(data.points, data.labels):
        lines.append(",".join([_format_float(v) for v in row] + [str(int(label))]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_dataset_csv(path) -> LabeledDataset:
    """Parse the dataset format; errors name the offending line."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CsvFormatError(f"cannot read dataset {path}: {exc}") from exc
    declared_k = None
    header = None
    header_line = 0
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is not None:
                raise CsvFormatError(f"{path}:{lineno}: comment after header")
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                key, value = key.strip(), value.strip()
                if key == "k":
                    try:
                        declared_k = int(value)
                    except ValueError:
                        raise CsvFormatError(
                            f"{path}:{lineno}: class count {value!r} is not an integer"
                        ) from None
                elif key == "version" and value != str(DATASET_FORMAT_VERSION):
                    raise CsvFormatError(
                        f"{path}:{lineno}: unsupported dataset version {value!r}"
                    )
            continue
        if header is None:
            header = line.split(",")
            header_line = lineno
            continue
        rows.append((lineno, line.split(",")))
    if header is None:
        raise CsvFormatError(f"{path}: no header row found")
    d = len(header) - 1
    if d < 1 or header != [f"f{j}" for j in range(d)] + ["label"]:
        raise CsvFormatError(
            f"{path}:{header_line}: header must be f0,..,f{max(d - 1, 0)},label, "
            f"got {','.join(header)!r}"
        )
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    points = np.empty((len(rows), d))
    labels = np.empty(len(rows), dtype=np.int64)
    for r, (lineno, fields) in enumerate(rows):
        if len(fields) != d + 1:
            raise CsvFormatError(
                f"{path}:{lineno}: expected {d + 1} fields, got {len(fields)}"
            )
        for j, field in enumerate(fields[:-1]):
            try:
                points[r, j] = float(field)
            except ValueError:
                raise CsvFormatError(
                    f"{path}:{lineno}: column f{j}: {field!r} is not a number"
                ) from None
        try:
            labels[r] = int(fields[-1])
        except ValueError:
            raise CsvFormatError(
                f"{path}:{lineno}: label {fields[-1]!r} is not an integer"
            ) from None
        if labels[r] < 0:
            raise CsvFormatError(f"{path}:{lineno}: label {labels[r]} is negative")
        if declared_k is not None and labels[r] >= declared_k:
            raise CsvFormatError(
                f"{path}:{lineno}: label {labels[r]} outside declared class "
                f"count k={declared_k}"
            )
    k = declared_k if declared_k is not None else int(labels.max()) + 1
    try:
        return LabeledDataset(points, labels, k)
    except ValueError as exc:
        raise CsvFormatError(f"{path}: {exc}") from exc


def write_trace_csv(path, trace) -> None:
    lines = [f"# version={TRACE_FORMAT_VERSION}", "iter,bayes_error"]
    for i, value in enumerate(np.asarray(trace)):
        lines.append(f"{i},{_format_float(value)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trace_csv(path) -> np.ndarray:
    values = []
    expected = 0
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line == "iter,bayes_error":
            continue
        fields = line.split(",")
        if len(fields) != 2 or int(fields[0]) != expected:
            raise CsvFormatError(f"{path}:{lineno}: malformed trace row {line!r}")
        values.append(float(fields[1]))
        expected += 1
    if not values:
        raise CsvFormatError(f"{path}: empty trace")
    return np.asarray(values)


def write_deltas_csv(path, deltas) -> None:
    arr = np.asarray(deltas, dtype=np.float64)
    lines = [f"# version={DELTAS_FORMAT_VERSION}"]
    lines.append(",".join(f"f{j}" for j in range(arr.shape[1])))
    for row in arr:
        lines.append(",".join(_format_float(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_deltas_csv(path) -> np.ndarray:
    rows = []
    d = None
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(",")
        if d is None:
            if fields != [f"f{j}" for j in range(len(fields))]:
                raise CsvFormatError(f"{path}:{lineno}: malformed deltas header")
            d = len(fields)
            continue
        if len(fields) != d:
            raise CsvFormatError(f"{path}:{lineno}: expected {d} fields")
        rows.append([float(v) for v in fields])
    if d is None or not rows:
        raise CsvFormatError(f"{path}: empty deltas file")
    return np.asarray(rows)


def read_frozen_file(path) -> frozenset:
    """Zero-based sample indices, one per line; blanks and # comments skipped."""
    indices = set()
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            value = int(line)
        except ValueError:
            raise CsvFormatError(
                f"{path}:{lineno}: frozen index {line!r} is not an integer"
            ) from None
        if value < 0:
            raise CsvFormatError(f"{path}:{lineno}: frozen index {value} is negative")
        indices.add(value)
    return frozenset(indices)


def _fingerprint(path) -> str:
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return f"sha256:{digest}"


def write_report(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _make_report(command, fingerprint, config, results, warnings, elapsed) -> dict:
    return {
        "version": REPORT_FORMAT_VERSION,
        "command": command,
        "input_fingerprint": fingerprint,
        "config": config,
        "results": dict(results, warnings=list(warnings)),
        "timing_seconds": elapsed,
    }


def _derived_path(out, tag: str) -> Path:
    p = Path(out)
    suffix = p.suffix if p.suffix else ".csv"
    return p.with_name(f"{p.stem}.{tag}{suffix}")


# ------------------------------------------------------------ subcommands

def _resolve_bandwidth(args, data: LabeledDataset, embedding) -> tuple:
    """Returns (sigma, source). The heuristic runs in the space where
    similarity is evaluated, so an embedding is applied first."""
    if args.sigma is not None:
        if args.sigma <= 0:
            raise ValueError(f"--sigma must be positive, got {args.sigma}")
        return float(args.sigma), "flag"
    target = data
    if embedding is not None:
        from .embed import embed_dataset

        target = embed_dataset(embedding, data)
    return median_heuristic_bandwidth(target), "median-heuristic"


def _load_optional_embedding(args):
    if getattr(args, "embedding", None) is None:
        return None
    return load_embedding(args.embedding)


def cmd_estimate(args) -> int:
    started = time.perf_counter()
    data = read_dataset_csv(args.dataset)
    embedding = _load_optional_embedding(args)
    sigma, sigma_source = _resolve_bandwidth(args, data, embedding)
    kernel = SimilarityKernel(bandwidth=sigma)
    target = data
    if embedding is not None:
        from .embed import embed_dataset

        target = embed_dataset(embedding, data)
    estimate = estimate_bayes_error(target, kernel, threads=args.threads)
    warnings = []
    if estimate.fallback_rows:
        warnings.append(
            f"{len(estimate.fallback_rows)} row(s) fell back to the uniform posterior"
        )
    print(f"bayes error: {estimate.value:.6f}")
    if args.out:
        lines = ["# version=1", "index,max_posterior"]
        lines += [
            f"{i},{_format_float(v)}"
            for i, v in enumerate(estimate.per_sample_max_posterior)
        ]
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"per-sample max posteriors written to {args.out}")
    else:
        for value in estimate.per_sample_max_posterior:
            print(f"{value:.6f}")
    for message in warnings:
        print(f"warning: {message}", file=sys.stderr)
    if args.report:
        config = {
            "dataset": str(args.dataset),
            "sigma": sigma,
            "sigma_source": sigma_source,
            "embedding": str(args.embedding) if args.embedding else None,
            "threads": args.threads,
            "out": str(args.out) if args.out else None,
            "n": data.n,
            "d": data.d,
            "k": data.num_classes,
        }
        results = {
            "bayes_error": estimate.value,
            "per_sample_max_posterior": [float(v) for v in estimate.per_sample_max_posterior],
        }
        write_report(
            args.report,
            _make_report(
                "estimate",
                _fingerprint(args.dataset),
                config,
                results,
                warnings,
                time.perf_counter() - started,
            ),
        )
    return EXIT_OK


def cmd_perturb(args) -> int:
    started = time.perf_counter()
    data = read_dataset_csv(args.dataset)
    embedding = _load_optional_embedding(args)
    frozen = read_frozen_file(args.frozen) if args.frozen else frozenset()
    if frozen and len(frozen) >= data.n:
        raise ValueError(
            f"frozen file covers all {data.n} samples; nothing to perturb"
        )
    sigma, sigma_source = _resolve_bandwidth(args, data, embedding)
    kernel = SimilarityKernel(bandwidth=sigma)
    constraint = PerturbationConstraint(
        norm_order=args.norm, radius=args.eps, frozen=frozen
    )
    eta = args.eta if args.eta is not None else default_step_size(data.n, args.eps)
    config = PgaConfig(step_size=eta, max_iterations=args.iters)
    result = pga_maximize(
        data, kernel, constraint, config, embedding=embedding, threads=args.threads
    )
    before = float(result.trace[0])
    after = float(result.trace[-1])
    write_dataset_csv(args.out, result.perturbed)
    deltas_path = _derived_path(args.out, "deltas")
    trace_path = _derived_path(args.out, "trace")
    write_deltas_csv(deltas_path, result.deltas)
    write_trace_csv(trace_path, result.trace)
    print(f"bayes error before: {before:.6f}")
    print(f"bayes error after:  {after:.6f}")
    print(f"lift: {after / before:.4f}" if before > 0 else "lift: undefined")
    print(f"perturbed dataset written to {args.out}")
    print(f"deltas written to {deltas_path}")
    print(f"trace written to {trace_path}")
    for message in result.warnings:
        print(f"warning: {message}", file=sys.stderr)
    if args.report:
        echo = {
            "dataset": str(args.dataset),
            "sigma": sigma,
            "sigma_source": sigma_source,
            "eps": constraint.radius,
            "norm": constraint.norm_order,
            "eta": float(eta),
            "eta_source": "flag" if args.eta is not None else "default",
            "iters": int(args.iters),
            "frozen": str(args.frozen) if args.frozen else None,
            "frozen_count": len(frozen),
            "embedding": str(args.embedding) if args.embedding else None,
            "threads": args.threads,
            "out": str(args.out),
            "n": data.n,
            "d": data.d,
            "k": data.num_classes,
        }
        results = {
            "bayes_error_before": before,
            "bayes_error_after": after,
            "trace": [float(v) for v in result.trace],
        }
        write_report(
            args.report,
            _make_report(
                "perturb",
                _fingerprint(args.dataset),
                echo,
                results,
                result.warnings,
                time.perf_counter() - started,
            ),
        )
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    started = time.perf_counter()
    data = read_dataset_csv(args.dataset)
    embedding = _load_optional_embedding(args)
    sigma, sigma_source = _resolve_bandwidth(args, data, embedding)
    kernel = SimilarityKernel(bandwidth=sigma)
    report = objective_and_gradient(data, kernel, embedding=embedding, threads=args.threads)
    fd = finite_difference_gradient(data, kernel, embedding=embedding, h=args.h)
    keep = np.ones(data.n, dtype=bool)
    for row in report.tied_rows:
        keep[row] = False
    if report.tied_rows:
        tied = ", ".join(str(r) for r in report.tied_rows)
        print(f"argmax ties at rows: {tied} (excluded from the comparison)")
    if keep.any():
        rel = np.abs(report.gradients[keep] - fd[keep]) / (np.abs(fd[keep]) + 1e-8)
        max_rel = float(rel.max())
    else:
        max_rel = 0.0
        print("all rows tied; nothing to compare")
    print(f"max relative error: {max_rel:.3e}")
    passed = max_rel <= GRADCHECK_THRESHOLD
    print("gradient check passed" if passed else "gradient check FAILED")
    if args.report:
        echo = {
            "dataset": str(args.dataset),
            "sigma": sigma,
            "sigma_source": sigma_source,
            "h": float(args.h),
            "embedding": str(args.embedding) if args.embedding else None,
            "threads": args.threads,
            "n": data.n,
            "d": data.d,
            "k": data.num_classes,
        }
        results = {
            "max_relative_error": max_rel,
            "threshold": GRADCHECK_THRESHOLD,
            "tied_rows": list(report.tied_rows),
            "passed": passed,
        }
        write_report(
            args.report,
            _make_report(
                "gradcheck",
                _fingerprint(args.dataset),
                echo,
                results,
                (),
                time.perf_counter() - started,
            ),
        )
    return EXIT_OK if passed else EXIT_INTERNAL


def cmd_gen(args) -> int:
    started = time.perf_counter()
    if args.generator == "moons":
        data = generate_moons(args.n, args.noise, args.seed)
        params = {"generator": "moons", "n": args.n, "noise": args.noise, "seed": args.seed}
    else:
        data = sample_truncated_normal_pair(
            canonical_truncated_normal_pair(), args.n, args.seed
        )
        params = {"generator": "truncnorm", "n": args.n, "seed": args.seed}
    write_dataset_csv(args.out, data)
    print(f"{args.generator} dataset with n={data.n} written to {args.out}")
    if args.report:
        write_report(
            args.report,
            _make_report(
                "gen",
                _fingerprint(args.out),
                dict(params, out=str(args.out)),
                {"n": data.n, "d": data.d, "k": data.num_classes},
                (),
                time.perf_counter() - started,
            ),
        )
    return EXIT_OK


def cmd_demo(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.name == "truncnorm":
        return _demo_truncnorm(args, outdir)
    return _demo_moons(args, outdir)


def _demo_truncnorm(args, outdir: Path) -> int:
    started = time.perf_counter()
    spec = canonical_truncated_normal_pair()
    analytic = analytic_bayes_error(spec)
    n = 2000
    data = sample_truncated_normal_pair(spec, n, args.seed)
    sigma = median_heuristic_bandwidth(data)
    estimate = estimate_bayes_error(data, SimilarityKernel(bandwidth=sigma), threads=args.threads)
    diff = abs(estimate.value - analytic)
    sample_path = outdir / "truncnorm_sample.csv"
    write_dataset_csv(sample_path, data)
    print(f"analytic bayes error:      {analytic:.6f}")
    print(f"sample estimate (n={n}): {estimate.value:.6f}  (sigma={sigma:.6f}, median heuristic)")
    print(f"absolute difference:       {diff:.6f}")
    print(f"sample written to {sample_path}")
    report_path = Path(args.report) if args.report else outdir / "truncnorm_report.json"
    config = {
        "name": "truncnorm",
        "n": n,
        "seed": args.seed,
        "sigma": sigma,
        "sigma_source": "median-heuristic",
        "threads": args.threads,
        "out": str(outdir),
    }
    results = {
        "analytic_bayes_error": analytic,
        "sample_estimate": estimate.value,
        "absolute_difference": diff,
    }
    write_report(
        report_path,
        _make_report(
            "demo",
            _fingerprint(sample_path),
            config,
            results,
            (),
            time.perf_counter() - started,
        ),
    )
    print(f"report written to {report_path}")
    return EXIT_OK


def _demo_moons(args, outdir: Path) -> int:
    started = time.perf_counter()
    n, noise, eps, iters = 200, 0.1, 0.25, DEFAULT_DEMO_ITERS
    data = generate_moons(n, noise, args.seed)
    sigma = MOONS_BANDWIDTH
    kernel = SimilarityKernel(bandwidth=sigma)
    eta = default_step_size(n, eps)
    constraint = PerturbationConstraint(norm_order="l2", radius=eps)
    config = PgaConfig(step_size=eta, max_iterations=iters)
    result = pga_maximize(data, kernel, constraint, config, threads=args.threads)
    before = float(result.trace[0])
    after = float(result.trace[-1])
    before_path = outdir / "moons_before.csv"
    after_path = outdir / "moons_after.csv"
    deltas_path = outdir / "moons_deltas.csv"
    trace_path = outdir / "moons_trace.csv"
    write_dataset_csv(before_path, data)
    write_dataset_csv(after_path, result.perturbed)
    write_deltas_csv(deltas_path, result.deltas)
    write_trace_csv(trace_path, result.trace)
    print(f"bayes error before: {before:.6f}")
    print(f"bayes error after:  {after:.6f}")
    print(f"lift: {after / before:.4f}  (budget eps={eps}, l2)")
    for path in (before_path, after_path, deltas_path, trace_path):
        print(f"wrote {path}")
    for message in result.warnings:
        print(f"warning: {message}", file=sys.stderr)
    report_path = Path(args.report) if args.report else outdir / "moons_report.json"
    config_echo = {
        "name": "moons",
        "n": n,
        "noise": noise,
        "seed": args.seed,
        "sigma": sigma,
        "sigma_source": "moons-calibrated",
        "eps": eps,
        "norm": "l2",
        "eta": eta,
        "iters": iters,
        "threads": args.threads,
        "out": str(outdir),
    }
    results = {
        "bayes_error_before": before,
        "bayes_error_after": after,
        "lift": after / before,
        "trace": [float(v) for v in result.trace],
    }
    write_report(
        report_path,
        _make_report(
            "demo",
            _fingerprint(before_path),
            config_echo,
            results,
            result.warnings,
            time.perf_counter() - started,
        ),
    )
    print(f"report written to {report_path}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _add_kernel_flags(sub) -> None:
    group = sub.add_mutually_exclusive_group()
    group.add_argument("--sigma", type=float, default=None, help="kernel bandwidth")
    group.add_argument(
        "--sigma-heuristic",
        action="store_true",
        help="use the median pairwise distance (the default when --sigma is absent)",
    )


def _add_common_flags(sub) -> None:
    sub.add_argument("--threads", type=int, default=1, help="estimator worker threads")
    sub.add_argument("--report", default=None, help="write a JSON run report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayeshield",
        description=(
            "Estimate the Bayes error of a labeled sample and construct "
            "perturbed datasets that raise it under a norm budget."
        ),
    )
    subs = parser.add_subparsers(dest="command", required=True)

    est = subs.add_parser("estimate", help="leave-one-out Bayes error estimate")
    est.add_argument("dataset", help="dataset CSV path")
    _add_kernel_flags(est)
    est.add_argument("--embedding", default=None, help="embedding map JSON file")
    est.add_argument("--out", default=None, help="write per-sample max posteriors here")
    _add_common_flags(est)
    est.set_defaults(handler=cmd_estimate)

    per = subs.add_parser("perturb", help="projected gradient ascent on the estimate")
    per.add_argument("dataset", help="dataset CSV path")
    per.add_argument("--eps", type=float, required=True, help="perturbation radius")
    per.add_argument("--norm", choices=list(NORM_ORDERS), default="l2", help="budget norm")
    per.add_argument(
        "--eta", type=float, default=None,
        help="ascent step size (default: 0.0036 * n * eps)",
    )
    per.add_argument("--iters", type=int, default=100, help="gradient steps")
    per.add_argument("--frozen", default=None, help="file of indices pinned to zero")
    per.add_argument("--embedding", default=None, help="embedding map JSON file")
    _add_kernel_flags(per)
    per.add_argument("--out", required=True, help="perturbed dataset CSV path")
    _add_common_flags(per)
    per.set_defaults(handler=cmd_perturb)

    grad = subs.add_parser("gradcheck", help="analytic vs finite-difference gradient")
    grad.add_argument("dataset", help="dataset CSV path")
    grad.add_argument("--h", type=float, default=1e-5, help="central difference step")
    grad.add_argument("--embedding", default=None, help="embedding map JSON file")
    _add_kernel_flags(grad)
    _add_common_flags(grad)
    grad.set_defaults(handler=cmd_gradcheck)

    gen = subs.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("generator", choices=["moons", "truncnorm"])
    gen.add_argument("--n", type=int, default=None, help="sample size")
    gen.add_argument("--noise", type=float, default=0.1, help="moons jitter std")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="dataset CSV path")
    _add_common_flags(gen)
    gen.set_defaults(handler=cmd_gen)

    demo = subs.add_parser("demo", help="run a canonical end-to-end example")
    demo.add_argument("name", choices=["truncnorm", "moons"])
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--out", default=".", help="output directory")
    _add_common_flags(demo)
    demo.set_defaults(handler=cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen" and args.n is None:
        args.n = 200 if args.generator == "moons" else 2000
    try:
        return args.handler(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
