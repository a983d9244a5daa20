"""Command-line interface.

Subcommands cover distribution evaluation/sampling/fitting, the
asymmetric-regression simulation study, and the quote-ingestion + HMM
pipeline.  All commands are deterministic given ``--seed`` and their
inputs; report files are written atomically (temp file, then rename) so
failures never leave partial output.  Exit codes: 0 success, 1 numeric
failure, 2 validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from contextlib import contextmanager
from typing import Iterator, List, Optional, Sequence

import numpy as np

from . import estimation, hmm, ingest, regression
from .distributions import AsymmetricLaplace, AsymmetricNormal, Distribution

DEFAULT_SEED = 12345


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


@contextmanager
def _atomic_write(path: str) -> Iterator:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _build_dist(args: argparse.Namespace) -> Distribution:
    scale = args.sigma if args.sigma is not None else getattr(args, "lam", None)
    if scale is None:
        raise ValueError("provide --sigma (normal) or --lambda (laplace)")
    if args.family == "laplace":
        return AsymmetricLaplace(mu=args.mu, lam=scale, p=args.p)
    return AsymmetricNormal(mu=args.mu, sigma=scale, p=args.p)


def _emit(args: argparse.Namespace, payload: dict) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        for key, value in payload.items():
            if isinstance(value, float):
                print(f"{key}={_fmt(value)}")
            elif isinstance(value, list):
                print(f"{key}={','.join(_fmt(v) for v in value)}")
            else:
                print(f"{key}={value}")


def _read_value_csv(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["value"]:
            raise ValueError(f"{path}: expected header 'value'")
        values = [float(row[0]) for row in reader if row and row[0].strip()]
    if not values:
        raise ValueError(f"{path}: no values")
    return np.asarray(values)


def _read_xy_csv(path: str) -> tuple:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y"]:
            raise ValueError(f"{path}: expected header 'x,y'")
        xs, ys = [], []
        for row in reader:
            if not row or not row[0].strip():
                continue
            xs.append(float(row[0]))
            ys.append(float(row[1]))
    return np.asarray(xs), np.asarray(ys)


def _cmd_dist_eval(args: argparse.Namespace) -> int:
    dist = _build_dist(args)
    _emit(args, {
        "pdf": float(dist.pdf(args.x)),
        "log_pdf": float(dist.log_pdf(args.x)),
        "cdf": float(dist.cdf(args.x)),
    })
    return 0


def _cmd_dist_sample(args: argparse.Namespace) -> int:
    dist = _build_dist(args)
    rng = np.random.default_rng(args.seed)
    samples = dist.sample(rng, args.n)
    if args.json:
        print(json.dumps({"samples": samples.tolist()}))
    else:
        for value in samples:
            print(_fmt(value))
    return 0


def _cmd_dist_fit(args: argparse.Namespace) -> int:
    samples = estimation.SampleSet.from_data(_read_value_csv(args.input))
    if args.fix_p is not None:
        if args.family == "laplace":
            fit = estimation.fit_laplace_fixed_p(samples, args.fix_p)
        else:
            fit = estimation.fit_normal_fixed_p(samples, args.fix_p)
    else:
        fit = estimation.hill_climb_p(samples, args.family)
    payload = dict(fit.dist.to_dict())
    payload["log_likelihood"] = fit.log_likelihood
    payload["partition_index"] = fit.partition_index
    print(json.dumps(payload, sort_keys=True))
    return 0


def _parse_grid(spec: str) -> List[float]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError("p-grid must look like start:stop:step")
    start, stop, step = (float(v) for v in parts)
    if step <= 0.0 or stop < start:
        raise ValueError("p-grid must have positive step and stop >= start")
    n = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(n)]


def _cmd_regress_study(args: argparse.Namespace) -> int:
    grid = _parse_grid(args.p_grid)
    report = regression.replicate_study(grid, runs=args.runs, seed=args.seed)
    os.makedirs(args.output_dir, exist_ok=True)
    study_path = os.path.join(args.output_dir, "study.csv")
    with _atomic_write(study_path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["p_true", "run", "ll_sym", "ll_asym", "p_hat"])
        for row in report.rows:
            writer.writerow([row.p_true, row.run, repr(row.ll_sym), repr(row.ll_asym), repr(row.p_hat)])
    summary_path = os.path.join(args.output_dir, "summary.json")
    with _atomic_write(summary_path) as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(args, {"rows": len(report.rows), "study_csv": study_path, "summary_json": summary_path})
    return 0


def _cmd_regress_fit(args: argparse.Namespace) -> int:
    x, y = _read_xy_csv(args.input)
    fit = regression.fit(x, y, args.family)
    payload = {
        "beta": fit.model.beta.tolist(),
        "sigma": fit.model.noise.sigma,
        "p": fit.model.noise.p,
        "log_likelihood": fit.log_likelihood,
        "converged": fit.converged,
    }
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        _emit(args, payload)
    return 0


def _cmd_hmm_fit(args: argparse.Namespace) -> int:
    if args.k < 2:
        raise ValueError("--k must be at least 2")
    quotes = ingest.load_quotes_csv(args.input)
    obs = ingest.log_roi_series(quotes)
    rng = np.random.default_rng(args.seed)
    model = hmm.mixture_init(obs, args.k, args.family, rng)
    result = hmm.baum_welch(model, obs, args.family, max_iters=args.max_iters)
    os.makedirs(args.output_dir, exist_ok=True)
    model_path = os.path.join(args.output_dir, "model.json")
    with _atomic_write(model_path) as fh:
        json.dump(result.model.sorted_by_mode().to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(args, {
        "log_likelihood": result.trace[-1],
        "iterations": len(result.trace),
        "converged": result.converged,
        "model_json": model_path,
    })
    return 0


def _cmd_hmm_report(args: argparse.Namespace) -> int:
    with open(args.model) as fh:
        model = hmm.HmmModel.from_dict(json.load(fh))
    quotes = ingest.load_quotes_csv(args.input)
    obs = ingest.log_roi_series(quotes)
    summary = hmm.forward_backward(model, obs)
    os.makedirs(args.output_dir, exist_ok=True)

    entropy_path = os.path.join(args.output_dir, "transition_entropy.csv")
    with _atomic_write(entropy_path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "entropy_bits"])
        for state, bits in enumerate(hmm.transition_entropy(model), start=1):
            writer.writerow([state, repr(float(bits))])

    written = [entropy_path]
    for include_missing, tag in ((True, "with_missing"), (False, "without_missing")):
        report = hmm.state_entropy_report(summary, include_missing=include_missing)
        hist_path = os.path.join(args.output_dir, f"entropy_hist_{tag}.csv")
        with _atomic_write(hist_path) as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_low", "bin_high", "count"])
            for i, count in enumerate(report.histogram_counts):
                writer.writerow([
                    repr(float(report.histogram_edges[i])),
                    repr(float(report.histogram_edges[i + 1])),
                    int(count),
                ])
        qq_path = os.path.join(args.output_dir, f"entropy_quantiles_{tag}.csv")
        with _atomic_write(qq_path) as fh:
            writer = csv.writer(fh)
            writer.writerow(["percentile", "normalized_entropy"])
            for pct, value in zip(range(1, 100), report.quantiles):
                writer.writerow([pct, repr(float(value))])
        written.extend([hist_path, qq_path])

    _emit(args, {"log_likelihood": summary.log_likelihood, "files": ",".join(written)})
    return 0


def _add_dist_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--family", choices=["laplace", "normal"], required=True)
    parser.add_argument("--mu", type=float, required=True)
    parser.add_argument("--sigma", type=float, default=None)
    parser.add_argument("--lambda", dest="lam", type=float, default=None)
    parser.add_argument("--p", type=float, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asymdist")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--json", action="store_true", help="machine-readable full-precision output")
    parser.add_argument("--output-dir", default=".")
    sub = parser.add_subparsers(dest="command", required=True)

    dist = sub.add_parser("dist").add_subparsers(dest="subcommand", required=True)
    d_eval = dist.add_parser("eval")
    _add_dist_params(d_eval)
    d_eval.add_argument("--x", type=float, required=True)
    d_eval.set_defaults(func=_cmd_dist_eval)
    d_sample = dist.add_parser("sample")
    _add_dist_params(d_sample)
    d_sample.add_argument("--n", type=int, required=True)
    d_sample.set_defaults(func=_cmd_dist_sample)
    d_fit = dist.add_parser("fit")
    d_fit.add_argument("--family", choices=["laplace", "normal"], required=True)
    d_fit.add_argument("--input", required=True)
    d_fit.add_argument("--fix-p", type=float, default=None)
    d_fit.set_defaults(func=_cmd_dist_fit)

    regress = sub.add_parser("regress").add_subparsers(dest="subcommand", required=True)
    r_study = regress.add_parser("study")
    r_study.add_argument("--p-grid", default="0.1:0.9:0.1")
    r_study.add_argument("--runs", type=int, default=100)
    r_study.set_defaults(func=_cmd_regress_study)
    r_fit = regress.add_parser("fit")
    r_fit.add_argument("--input", required=True)
    r_fit.add_argument("--family", choices=["symmetric", "asymmetric"], default="asymmetric")
    r_fit.set_defaults(func=_cmd_regress_fit)

    hmm_cmd = sub.add_parser("hmm").add_subparsers(dest="subcommand", required=True)
    h_fit = hmm_cmd.add_parser("fit")
    h_fit.add_argument("--input", required=True)
    h_fit.add_argument("--k", type=int, required=True)
    h_fit.add_argument("--family", choices=["symmetric", "asymmetric"], default="asymmetric")
    h_fit.add_argument("--max-iters", type=int, default=200)
    h_fit.set_defaults(func=_cmd_hmm_fit)
    h_report = hmm_cmd.add_parser("report")
    h_report.add_argument("--model", required=True)
    h_report.add_argument("--input", required=True)
    h_report.set_defaults(func=_cmd_hmm_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
