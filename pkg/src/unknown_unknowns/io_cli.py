"""CSV ingestion, JSON reports and the ``uu`` command line.

Subcommands::

    uu estimate --input sample.csv --aggregate sum --estimator bucket [--bound]
    uu simulate --n-items 100 --lambda 0 --sources 100 --source-size 5 --seed 1
    uu sweep --sources 100 10 5 --lambda 0 4 --rho 0 1 --output out/
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import os
import secrets
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence, TextIO

import numpy as np

from .aggregates import Extreme, ExtremeReport, estimate_avg, estimate_count, estimate_extreme
from .bounds import BoundConfig, delta_upper_bound
from .core_stats import IntegratedSample, Observation, build_sample, coverage_stats, frequency_statistics
from .errors import EstimationError, ParseError
from .estimators import TRUST_THRESHOLD, EstimateReport, EstimatorKind, estimate_sum
from .montecarlo import MCConfig
from .simulator import SimConfig, Streaker, draw_observations, make_ground_truth, run_experiment

HEADER = ("source_id", "entity_id", "value")
AGGREGATES = ("sum", "count", "avg", "min", "max")
SEED_ENV = "UU_SEED"


# -- CSV ---------------------------------------------------------------------

def read_observations(stream: TextIO) -> list[Observation]:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("missing header", 1) from None
    if tuple(h.strip() for h in header) != HEADER:
        raise ParseError(f"expected header {','.join(HEADER)}", 1)
    out = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line)
        source, entity, raw = (cell.strip() for cell in row)
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"malformed value {raw!r}", line) from None
        out.append(Observation(source, entity, value))
    return out


def ingest_csv(path: str | os.PathLike) -> IntegratedSample:
    """Read a ``source_id,entity_id,value`` file in arrival order."""
    with open(path, newline="", encoding="utf-8") as fh:
        observations = read_observations(fh)
    try:
        return build_sample(observations)
    except EstimationError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def write_observations(observations, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(HEADER)
    for o in observations:
        writer.writerow((o.source_id, o.entity_id, repr(float(o.value))))


def write_sample_csv(sample: IntegratedSample, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_observations(sample.observations, fh)


# -- JSON report ---------------------------------------------------------------

@dataclass
class ReportDocument:
    query: dict
    estimator: str
    report: EstimateReport | ExtremeReport
    bound: float | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "query": dict(self.query),
            "estimator": self.estimator,
            "report": self.report.to_dict(),
            "bound": self.bound,
            "metadata": dict(self.metadata),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ReportDocument":
        raw = data["report"]
        report = ExtremeReport.from_dict(raw) if "which" in raw else EstimateReport.from_dict(raw)
        return cls(data["query"], data["estimator"], report, data.get("bound"),
                   dict(data.get("metadata", {})))

    @classmethod
    def from_json(cls, text: str) -> "ReportDocument":
        return cls.from_dict(json.loads(text))


def _resolve_seed(seed: int | None) -> tuple[int, bool]:
    """Flag, then environment, then a fresh random seed (flagged as generated)."""
    if seed is not None:
        return seed, False
    env = os.environ.get(SEED_ENV)
    if env:
        return int(env), False
    return secrets.randbits(63), True


def build_report(
    sample: IntegratedSample,
    aggregate: str = "sum",
    estimator: str = "naive",
    *,
    bound: bool = False,
    trust_threshold: float = TRUST_THRESHOLD,
    seed: int = 0,
    config_echo: dict | None = None,
) -> ReportDocument:
    aggregate = aggregate.lower()
    mc = MCConfig(seed=seed)
    if aggregate == "sum":
        kind = EstimatorKind.parse(estimator).value
        report = estimate_sum(sample, kind, trust_threshold=trust_threshold, mc_config=mc)
    elif aggregate == "count":
        kind = estimator.lower()
        report = estimate_count(sample, kind, trust_threshold=trust_threshold, mc_config=mc)
    elif aggregate == "avg":
        kind = "bucket"
        report = estimate_avg(sample, trust_threshold=trust_threshold)
    elif aggregate in ("min", "max"):
        kind = "bucket"
        report = estimate_extreme(sample, aggregate)
    else:
        raise ValueError(f"unknown aggregate {aggregate!r}")

    fs = frequency_statistics(sample)
    metadata: dict[str, Any] = {"n": fs.n, "c": fs.c, "seed": seed, "config": dict(config_echo or {})}
    try:
        cov = coverage_stats(fs)
        metadata["coverage"], metadata["gamma_sq"] = cov.c_hat, cov.gamma_sq
    except EstimationError:
        metadata["coverage"], metadata["gamma_sq"] = (1.0 - fs.f1 / fs.n if fs.n else 0.0), None

    bound_value = None
    if bound:
        try:
            bound_value = delta_upper_bound(sample, BoundConfig())
        except EstimationError:
            bound_value = None
        metadata["bound_status"] = "finite" if bound_value is not None else "no finite bound"
        if isinstance(report, EstimateReport):
            report = replace(report, upper_bound=bound_value)
            # the same bound read as a cap on the adjustment alone
            metadata["bound_adjustment"] = (
                None if bound_value is None else bound_value - report.phi_obs
            )
    return ReportDocument({"aggregate": aggregate.capitalize()}, kind, report, bound_value, metadata)


def _human_summary(doc: ReportDocument) -> str:
    r = doc.report
    lines = [f"{doc.query['aggregate']} via {doc.estimator}"]
    if isinstance(r, ExtremeReport):
        shown = r.value if r.reported else "withheld (missing entities likely near the extreme)"
        lines.append(f"  observed {r.which.value}: {r.observed_extreme}  reported: {shown}")
    else:
        n_hat = "divergent" if r.n_hat is None else f"{r.n_hat:.3f}"
        lines += [
            f"  observed: {r.phi_obs:.6g}  adjustment: {r.delta:+.6g}  estimate: {r.phi_hat:.6g}",
            f"  estimated entities: {n_hat}  coverage: {r.coverage:.3f}  trusted: {r.trust}",
        ]
    if "bound_status" in doc.metadata:
        lines.append(f"  upper bound: {doc.bound if doc.bound is not None else 'no finite bound'}")
    lines.append(f"  n={doc.metadata['n']} c={doc.metadata['c']} seed={doc.metadata['seed']}")
    return "\n".join(lines)


# -- commands ------------------------------------------------------------------

def _sim_config(args, seed: int, *, sources=None, lam=None, rho=None) -> SimConfig:
    streaker = None
    if args.streaker_at is not None or args.streaker_size is not None:
        if args.streaker_at is None or args.streaker_size is None:
            raise ValueError("--streaker-at and --streaker-size go together")
        streaker = Streaker(args.streaker_at, args.streaker_size)
    return SimConfig(
        n_items=args.n_items,
        value_min=args.value_min,
        value_step=args.value_step,
        lam=args.lam if lam is None else lam,
        rho=args.rho if rho is None else rho,
        num_sources=args.sources if sources is None else sources,
        source_size=args.source_size,
        streaker=streaker,
        interleave=args.interleave,
        seed=seed,
    )


def cmd_estimate(args, out: TextIO) -> int:
    seed, generated = _resolve_seed(args.seed)
    sample = ingest_csv(args.input)
    doc = build_report(
        sample, args.aggregate, args.estimator, bound=args.bound,
        trust_threshold=args.trust_threshold, seed=seed,
        config_echo={"input": str(args.input), "aggregate": args.aggregate,
                     "estimator": args.estimator, "bound": args.bound,
                     "trust_threshold": args.trust_threshold},
    )
    doc.metadata["seed_generated"] = generated
    out.write(_human_summary(doc) + "\n" if args.human else doc.to_json() + "\n")
    return 0


def cmd_simulate(args, out: TextIO) -> int:
    seed, generated = _resolve_seed(args.seed)
    if generated:
        print(f"seed: {seed}", file=sys.stderr)
    config = _sim_config(args, seed)
    rng = np.random.default_rng(seed)
    gt = make_ground_truth(config, rng)
    write_observations(draw_observations(gt, config, rng), out)
    return 0


def _fmt(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def sweep_rows(result, kinds: Sequence[str]) -> list[dict]:
    """One row per (recorded n, estimator)."""
    extreme = result.aggregate in ("min", "max")
    rows = []
    for t, n in enumerate(result.ns):
        for k in kinds:
            col = result.estimates[k][:, t]
            shown = col[~np.isnan(col)]
            row = {
                "n": int(n),
                "estimator": k,
                "phi_mean": float(shown.mean()) if len(shown) else math.nan,
                "phi_std": float(shown.std()) if len(shown) else math.nan,
                "phi_true": float(result.truth.mean()),
            }
            if extreme:
                hits = np.isclose(col, result.truth)[~np.isnan(col)]
                row["reporting_rate"] = len(shown) / len(col)
                row["precision"] = float(hits.mean()) if len(hits) else math.nan
            rows.append(row)
    return rows


def write_sweep_csv(rows: list[dict], path: str | os.PathLike) -> None:
    columns = list(rows[0]) if rows else ["n", "estimator", "phi_mean", "phi_std", "phi_true"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] if isinstance(row[c], (str, int)) else _fmt(row[c]) for c in columns])


def _sweep_name(aggregate, w, lam, rho) -> str:
    return f"{aggregate}_w{w}_lam{lam:g}_rho{rho:g}.csv"


def cmd_sweep(args, out: TextIO) -> int:
    seed, generated = _resolve_seed(args.seed)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    aggregate = args.aggregate.lower()
    if aggregate in ("min", "max", "avg"):
        kinds = ["observed", "bucket"]
    else:
        kinds = [EstimatorKind.parse(k).value for k in args.estimators]
    mc = MCConfig(seed=seed)
    for w, lam, rho in itertools.product(args.sources, args.lam, args.rho):
        config = _sim_config(args, seed, sources=w, lam=lam, rho=rho)
        result = run_experiment(config, kinds, args.replications, args.stride,
                                aggregate=aggregate, mc_config=mc)
        path = outdir / _sweep_name(aggregate, w, lam, rho)
        write_sweep_csv(sweep_rows(result, kinds), path)
        out.write(f"{path}\n")
    if generated:
        out.write(f"seed: {seed}\n")
    return 0


# -- parser ----------------------------------------------------------------------

def _add_sim_flags(p: argparse.ArgumentParser, *, grid: bool) -> None:
    nargs = "+" if grid else None
    p.add_argument("--n-items", type=int, default=100)
    p.add_argument("--value-min", type=float, default=10.0)
    p.add_argument("--value-step", type=float, default=10.0)
    p.add_argument("--lambda", dest="lam", type=float, nargs=nargs, default=[0.0] if grid else 0.0)
    p.add_argument("--rho", type=float, nargs=nargs, default=[0.0] if grid else 0.0)
    p.add_argument("--sources", type=int, nargs=nargs, default=[100] if grid else 100)
    p.add_argument("--source-size", type=int, default=5)
    p.add_argument("--streaker-at", type=int)
    p.add_argument("--streaker-size", type=int)
    p.add_argument("--interleave", choices=("round-robin", "sequential"), default="round-robin")
    p.add_argument("--seed", type=int, help=f"random seed (falls back to ${SEED_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uu", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate an aggregate from a CSV sample")
    est.add_argument("--input", required=True)
    est.add_argument("--aggregate", choices=AGGREGATES, default="sum")
    est.add_argument("--estimator", default="naive",
                     help="naive, frequency, frequency-simple, bucket, bucket-frequency, "
                          "monte-carlo, observed (count also accepts chao92)")
    est.add_argument("--bound", action="store_true", help="include the worst-case upper bound")
    est.add_argument("--trust-threshold", type=float, default=TRUST_THRESHOLD)
    est.add_argument("--seed", type=int, help=f"random seed (falls back to ${SEED_ENV})")
    est.add_argument("--human", action="store_true", help="print a readable summary instead of JSON")
    est.set_defaults(func=cmd_estimate)

    sim = sub.add_parser("simulate", help="write a synthetic sample as CSV")
    _add_sim_flags(sim, grid=False)
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="prefix-replay experiments over a config grid")
    _add_sim_flags(sw, grid=True)
    sw.add_argument("--aggregate", choices=AGGREGATES, default="sum")
    sw.add_argument("--estimators", nargs="+", default=["observed", "naive", "frequency", "bucket"])
    sw.add_argument("--replications", type=int, default=50)
    sw.add_argument("--stride", type=int, default=10)
    sw.add_argument("--output", required=True, help="directory for the per-config CSV files")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = out if out is not None else sys.stdout
    try:
        return args.func(args, out)
    except (EstimationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
