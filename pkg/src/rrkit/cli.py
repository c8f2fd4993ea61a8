"""Command-line front end.

Subcommands mirror the library surface: ``ingest`` builds a dataset file
from CSV plus a schema spec, ``randomize``/``estimate``/``cluster``/
``adjust`` run the protocols and write their artifacts, ``experiment`` runs
the Monte-Carlo accuracy loop, and ``curve-sqrtB`` tabulates the error-bound
scale factor against category count.

Every invocation writes a run manifest (JSON) capturing the exact
configuration, seed, dataset checksum and produced files; each text artifact
points back at its manifest on the first line. All randomness flows from the
single --seed flag. Artifacts land in --out-dir, defaulting to $RRKIT_OUT_DIR
or the working directory.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

from . import __version__
from .adjustment import rr_adjust
from .clustering import cluster_attributes
from .dataset import Dataset, dataset_to_csv, load_csv, parse_schema_spec
from .dependence import matrix_to_tsv
from .error_model import curve_to_tsv, sqrt_b_curve
from .pipeline import (
    CLUSTERS,
    DEPENDENCE_METHODS,
    INDEPENDENT,
    JOINT,
    METHODS,
    PipelineConfig,
    dependence_for_clustering,
    run_experiment,
    run_pipeline,
    run_rr_clusters,
    run_rr_independent,
    run_rr_joint,
)


@dataclass
class RunManifest:
    """Reproducibility record emitted beside every artifact."""

    command: str
    version: str
    seed: int
    config: dict
    dataset_checksum: str | None = None
    effective_n: int | None = None
    elapsed_seconds: float | None = None
    artifacts: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "dataset_checksum": self.dataset_checksum,
            "effective_n": self.effective_n,
            "elapsed_seconds": self.elapsed_seconds,
            "artifacts": self.artifacts,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


class _Writer:
    """Collects artifacts for one run and writes the manifest last."""

    def __init__(self, args, command: str):
        out_dir = args.out_dir or os.environ.get("RRKIT_OUT_DIR") or "."
        os.makedirs(out_dir, exist_ok=True)
        self.prefix = os.path.join(out_dir, args.out_prefix)
        self.manifest_name = os.path.basename(self.prefix) + ".manifest.json"
        flags = {k: v for k, v in vars(args).items() if k not in ("func", "out_dir")}
        self.manifest = RunManifest(command=command, version=__version__,
                                    seed=args.seed, config=flags)
        self.started = time.perf_counter()

    def path(self, suffix: str) -> str:
        return f"{self.prefix}.{suffix}"

    def write(self, suffix: str, text: str) -> str:
        target = self.path(suffix)
        with open(target, "w") as fh:
            fh.write(text)
        self.manifest.artifacts.append(os.path.basename(target))
        return target

    def finish(self) -> None:
        self.manifest.elapsed_seconds = round(time.perf_counter() - self.started, 6)
        with open(self.path("manifest.json"), "w") as fh:
            fh.write(self.manifest.to_json())


def _load_dataset(path: str) -> Dataset:
    with open(path) as fh:
        return Dataset.from_json(fh.read())


def _config_from(args) -> PipelineConfig:
    return PipelineConfig(
        method=args.method,
        p=args.p,
        epsilon=args.epsilon,
        adjust=getattr(args, "adjust", False),
        size_cap=args.size_cap,
        min_dependence=args.min_dependence,
        dependence_method=args.dependence_method,
        seed=args.seed,
    )


def _add_dataset_flag(parser):
    parser.add_argument("--dataset", required=True, help="dataset JSON produced by ingest")


def _add_method_flags(parser, methods=METHODS):
    parser.add_argument("--method", required=True, choices=methods)
    parser.add_argument("--p", type=float, default=None, help="keep probability")
    parser.add_argument("--epsilon", type=float, default=None,
                        help="per-release privacy level (alternative to --p)")
    _add_cluster_flags(parser)


def _add_cluster_flags(parser):
    parser.add_argument("--size-cap", type=int, default=50, dest="size_cap",
                        help="largest permitted cluster joint domain")
    parser.add_argument("--min-dependence", type=float, default=0.1, dest="min_dependence",
                        help="smallest dependence that still merges clusters")
    parser.add_argument("--dependence-method", choices=DEPENDENCE_METHODS,
                        default="plaintext-oracle", dest="dependence_method")


def _add_common_flags(parser):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-prefix", required=True, dest="out_prefix")
    parser.add_argument("--out-dir", default=None, dest="out_dir",
                        help="artifact directory (default: $RRKIT_OUT_DIR or .)")


def _cmd_ingest(args) -> int:
    writer = _Writer(args, "ingest")
    with open(args.schema) as fh:
        spec = parse_schema_spec(fh.read())
    data, report = load_csv(args.csv, spec, repeat=args.repeat)
    writer.manifest.dataset_checksum = data.checksum()
    writer.manifest.effective_n = data.n
    writer.write("dataset.json", data.to_json(manifest=writer.manifest_name))
    writer.write("report.txt", f"# manifest: {writer.manifest_name}\n" + report.render())
    writer.finish()
    print(f"ingested {data.n} records x {data.m} attributes -> {writer.path('dataset.json')}")
    return 0


def _cmd_randomize(args) -> int:
    writer = _Writer(args, "randomize")
    data = _load_dataset(args.dataset)
    config = _config_from(args)
    result = run_pipeline(data, config)
    writer.manifest.dataset_checksum = data.checksum()
    writer.manifest.effective_n = data.n
    randomized = Dataset(data.schema, result.randomized)
    writer.write("randomized.csv", dataset_to_csv(randomized, manifest=writer.manifest_name))
    if result.partition is not None:
        writer.write("partition.txt",
                     result.partition.to_text(data.names, manifest=writer.manifest_name))
    writer.finish()
    print(f"randomized {data.n} records via {config.label} -> {writer.path('randomized.csv')}")
    return 0


def _cmd_estimate(args) -> int:
    writer = _Writer(args, "estimate")
    data = _load_dataset(args.dataset)
    config = _config_from(args)
    writer.manifest.dataset_checksum = data.checksum()
    writer.manifest.effective_n = data.n
    stamp = f"# manifest: {writer.manifest_name}\n"
    if config.method == INDEPENDENT:
        run = run_rr_independent(data, p=config.p, epsilon=config.epsilon, seed=config.seed)
        for name, dist in zip(data.names, run.marginals):
            writer.write(f"dist-{name}.txt", stamp + dist.to_text())
    elif config.method == JOINT:
        run = run_rr_joint(data, None, p=config.p, epsilon=config.epsilon, seed=config.seed,
                           max_joint_size=config.max_joint_size)
        writer.write("dist-joint.txt", stamp + run.distribution.to_text())
    else:
        run = run_rr_clusters(data, config)
        for k, dist in enumerate(run.distributions):
            writer.write(f"dist-cluster{k}.txt", stamp + dist.to_text())
        writer.write("partition.txt",
                     run.partition.to_text(data.names, manifest=writer.manifest_name))
    writer.finish()
    print(f"estimated distributions via {config.label} -> {writer.prefix}.dist-*.txt")
    return 0


def _cmd_cluster(args) -> int:
    writer = _Writer(args, "cluster")
    data = _load_dataset(args.dataset)
    p = 0.5 if args.p is None and args.epsilon is None else args.p
    config = PipelineConfig(
        method=CLUSTERS, p=p, epsilon=args.epsilon,
        size_cap=args.size_cap, min_dependence=args.min_dependence,
        dependence_method=args.dependence_method, seed=args.seed,
    )
    dep = dependence_for_clustering(data, config)
    partition = cluster_attributes(dep, data.sizes, config.size_cap, config.min_dependence)
    writer.manifest.dataset_checksum = data.checksum()
    writer.manifest.effective_n = data.n
    writer.write("dependence.tsv", matrix_to_tsv(dep, data.names, manifest=writer.manifest_name))
    writer.write("partition.txt", partition.to_text(data.names, manifest=writer.manifest_name))
    writer.finish()
    print(f"{len(partition.clusters)} clusters -> {writer.path('partition.txt')}")
    return 0


def _cmd_adjust(args) -> int:
    writer = _Writer(args, "adjust")
    data = _load_dataset(args.dataset)
    args.adjust = True
    config = _config_from(args)
    result = run_pipeline(data, config)
    writer.manifest.dataset_checksum = data.checksum()
    writer.manifest.effective_n = data.n
    randomized = Dataset(data.schema, result.weighted.records)
    writer.write(
        "weighted.csv",
        dataset_to_csv(randomized, manifest=writer.manifest_name,
                       weights=result.weighted.weights),
    )
    summary = (
        f"# manifest: {writer.manifest_name}\n"
        f"iterations\t{result.weighted.iterations}\n"
        f"residual\t{result.weighted.residual!r}\n"
        f"converged\t{result.weighted.converged}\n"
        f"diverted\t{result.weighted.total_diverted!r}\n"
    )
    writer.write("adjustment.txt", summary)
    writer.finish()
    print(f"adjusted weights in {result.weighted.iterations} sweeps "
          f"-> {writer.path('weighted.csv')}")
    return 0


def _cmd_experiment(args) -> int:
    writer = _Writer(args, "experiment")
    data = _load_dataset(args.dataset)
    config = _config_from(args)
    sigmas = args.sigma or [0.1]
    result = run_experiment(data, config, sigmas, args.runs)
    writer.manifest.dataset_checksum = data.checksum()
    writer.manifest.effective_n = data.n
    writer.write("experiment.tsv", result.to_tsv(manifest=writer.manifest_name))
    writer.finish()
    for row in result.rows:
        print(f"{row.method}\tsigma={row.sigma}\tmedian_abs={row.median_absolute_error:.4f}"
              f"\tmedian_rel={row.median_relative_error:.4f}")
    return 0


def _parse_categories(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",") if part]


def _cmd_curve(args) -> int:
    writer = _Writer(args, "curve-sqrtB")
    rows = sqrt_b_curve(_parse_categories(args.categories), args.alpha)
    writer.write("curve.tsv", curve_to_tsv(rows, manifest=writer.manifest_name))
    writer.finish()
    print(f"{len(rows)} curve points -> {writer.path('curve.tsv')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rrkit",
        description="Randomized-response estimation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    ingest = sub.add_parser("ingest", help="CSV + schema spec -> dataset JSON")
    ingest.add_argument("--csv", required=True)
    ingest.add_argument("--schema", required=True, help="schema spec file")
    ingest.add_argument("--repeat", type=int, default=1,
                        help="concatenate the records this many times")
    _add_common_flags(ingest)
    ingest.set_defaults(func=_cmd_ingest)

    randomize = sub.add_parser("randomize", help="randomize a dataset")
    _add_dataset_flag(randomize)
    _add_method_flags(randomize)
    randomize.add_argument("--adjust", action="store_true")
    _add_common_flags(randomize)
    randomize.set_defaults(func=_cmd_randomize)

    estimate = sub.add_parser("estimate", help="emit corrected distribution estimates")
    _add_dataset_flag(estimate)
    _add_method_flags(estimate, methods=(INDEPENDENT, JOINT, CLUSTERS))
    _add_common_flags(estimate)
    estimate.set_defaults(func=_cmd_estimate)

    cluster = sub.add_parser("cluster", help="partition attributes by dependence")
    _add_dataset_flag(cluster)
    cluster.add_argument("--p", type=float, default=None,
                         help="keep probability for distributed dependence estimation")
    cluster.add_argument("--epsilon", type=float, default=None)
    _add_cluster_flags(cluster)
    _add_common_flags(cluster)
    cluster.set_defaults(func=_cmd_cluster)

    adjust = sub.add_parser("adjust", help="randomize and fit record weights")
    _add_dataset_flag(adjust)
    _add_method_flags(adjust, methods=(INDEPENDENT, JOINT, CLUSTERS))
    _add_common_flags(adjust)
    adjust.set_defaults(func=_cmd_adjust)

    experiment = sub.add_parser("experiment", help="Monte-Carlo query-accuracy tables")
    _add_dataset_flag(experiment)
    _add_method_flags(experiment)
    experiment.add_argument("--adjust", action="store_true")
    experiment.add_argument("--sigma", type=float, action="append",
                            help="coverage level; repeatable")
    experiment.add_argument("--runs", type=int, default=1000)
    _add_common_flags(experiment)
    experiment.set_defaults(func=_cmd_experiment)

    curve = sub.add_parser("curve-sqrtB", help="error-bound scale factor vs category count")
    curve.add_argument("--categories", required=True,
                       help="comma list (2,6,30) or inclusive range (2:1000)")
    curve.add_argument("--alpha", type=float, default=0.05)
    _add_common_flags(curve)
    curve.set_defaults(func=_cmd_curve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # component errors become qualified one-liners
        print(f"error: {type(exc).__module__}.{type(exc).__qualname__}: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
