"""Command-line front end.

    btm-disagg synth        --out DIR [--config FILE] [--seed N]
    btm-disagg cluster      --data CSV --out DIR
    btm-disagg disaggregate --data CSV --groups JSON [--group NAME] --out DIR
    btm-disagg baseline     --data CSV --groups JSON [--group NAME] --out DIR
    btm-disagg scenario     --data CSV --groups JSON --group NAME --events JSON --out DIR
    btm-disagg sweep        --data CSV --groups JSON [--group NAME] [--fractions 1,0.5] --out DIR
    btm-disagg correlate    --data CSV [--attributes JSON] [--sizes 1,5,10] --out DIR

Exit status: 0 on success, 1 when the data or configuration is rejected,
2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import pandas as pd

from . import reporting
from .correlation import correlation_study
from .dataset import ingest_csv, to_frame
from .errors import ConfigError
from .pipeline import (
    PipelineConfig,
    parallel_map,
    prepare_library,
    run_dd_baseline,
    run_stream,
    scenario_run,
    sensitivity_sweep,
)
from .scenario import load_events
from .synthetic import SynthConfig, generate_synthetic_feeder

VERBS = ("synth", "cluster", "disaggregate", "baseline", "scenario", "sweep", "correlate")


class UsageError(Exception):
    """Bad command line; maps to exit status 2."""


@dataclass(frozen=True)
class CommandSpec:
    verb: str
    out: str
    data: str | None = None
    groups: str | None = None
    group: str | None = None
    config: str | None = None
    seed: int | None = None
    events: str | None = None
    attributes: str | None = None
    fractions: tuple | None = None
    sizes: tuple = (1, 5, 10, 30)
    T: int | None = None
    M: int | str | None = None
    N: int | str | None = None
    stride: int | None = None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _count(text):
    if text == "auto":
        return text
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'auto', got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'auto', got {text!r}")
    return value


def _number_list(kind):
    def parse(text):
        try:
            values = tuple(kind(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None
        if not values:
            raise argparse.ArgumentTypeError("list is empty")
        return values

    return parse


def _nonempty(text):
    if not text:
        raise argparse.ArgumentTypeError("path must not be empty")
    return text


def build_parser():
    parser = _Parser(prog="btm-disagg", description="Behind-the-meter solar and demand disaggregation.")
    sub = parser.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)
    sub.required = True

    def verb(name, help_text, data=True, groups=False, group=False):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--out", required=True, type=_nonempty, help="output directory")
        p.add_argument("--config", type=_nonempty, help="TOML config file")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
        if data:
            p.add_argument("--data", required=True, type=_nonempty, help="meter CSV")
        if groups:
            p.add_argument("--groups", required=True, type=_nonempty, help="groups JSON")
            p.add_argument("--group", required=group, help="group name" + ("" if group else " (default: all)"))
        if name != "synth" and name != "correlate":
            p.add_argument("-T", "--window", dest="T", type=int, help="window length in hours")
            p.add_argument("-M", dest="M", type=_count, help="demand candidates (or 'auto')")
            p.add_argument("-N", dest="N", type=_count, help="solar candidates (or 'auto')")
            p.add_argument("--stride", type=int, help="hours between window ends")
        return p

    verb("synth", "Generate a synthetic feeder with ground truth.", data=False)
    verb("cluster", "Cluster observed customers into candidate exemplars.")
    verb("disaggregate", "Disaggregate net demand with regret-weighted exemplars.", groups=True)
    verb("baseline", "Disaggregate with the best single candidate pair per window.", groups=True)
    p = verb("scenario", "Apply unobserved PV events, then disaggregate.", groups=True, group=True)
    p.add_argument("--events", required=True, type=_nonempty, help="events JSON")
    p = verb("sweep", "Repeat the disaggregation with fewer observed PVs.", groups=True)
    p.add_argument("--fractions", type=_number_list(float), help="observed-PV fractions, e.g. 1.0,0.5")
    p = verb("correlate", "Correlation study of observed customers.")
    p.add_argument("--attributes", type=_nonempty, help="per-meter attributes JSON (azimuths)")
    p.add_argument("--sizes", type=_number_list(int), default=(1, 5, 10, 30), help="demand group sizes")
    return parser


def parse_command(argv):
    """Parse ``argv`` (without the program name) into a :class:`CommandSpec`."""
    argv = list(argv)
    if not argv:
        raise UsageError(f"btm-disagg: a verb is required: {', '.join(VERBS)}")
    ns = build_parser().parse_args(argv)
    return CommandSpec(**{k: v for k, v in vars(ns).items() if v is not None})


def _pipeline_config(spec):
    cfg = PipelineConfig.from_file(spec.config) if spec.config else PipelineConfig()
    overrides = {k: getattr(spec, k) for k in ("T", "M", "N", "stride", "seed") if getattr(spec, k) is not None}
    if spec.fractions is not None:
        overrides["fractions"] = spec.fractions
    try:
        return replace(cfg, **overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _load(spec):
    return ingest_csv(spec.data, groups=spec.groups, attributes=spec.attributes)


def _group_names(spec, dataset):
    if spec.group is not None:
        return [spec.group]
    if not dataset.groups:
        raise ConfigError("the groups file defines no groups")
    return sorted(dataset.groups)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _synth(spec):
    cfg = SynthConfig.from_file(spec.config) if spec.config else SynthConfig()
    ds = generate_synthetic_feeder(cfg, seed=0 if spec.seed is None else spec.seed)
    buf = reporting.csv_text(to_frame(ds))
    return {
        "": {
            "meters.csv": buf,
            "groups.json": _json(ds.groups),
            "attributes.json": _json(ds.attributes),
        }
    }


def _cluster(spec):
    cfg = _pipeline_config(spec)
    lib = prepare_library(_load(spec), cfg)
    out = {}
    for kind, result, ids in (
        ("demand", lib.demand_clustering, lib.demand_ids),
        ("solar", lib.solar_clustering, lib.solar_ids),
    ):
        out[kind] = {
            "k": result.k,
            "gamma_curve": {str(k): v for k, v in (result.gamma_curve or {}).items()},
            "members": {str(c): m for c, m in result.members(ids).items()},
        }
    return {"": {"clusters.json": _json(out)}}


def _disaggregate(spec, method):
    cfg = _pipeline_config(spec)
    ds = _load(spec)
    names = _group_names(spec, ds)
    for name in names:
        if name not in ds.groups:
            raise ConfigError(f"unknown group {name!r}")
    lib = prepare_library(ds, cfg)
    run = run_stream if method == "rgvp" else run_dd_baseline
    reports = parallel_map(lambda g: run(ds, g, cfg, lib), names)
    single = spec.group is not None
    return {
        ("" if single else r.group): reporting.render_plot_data(r, cfg.histogram_bins) for r in reports
    }


def _scenario(spec):
    cfg = _pipeline_config(spec)
    ds = _load(spec)
    events = load_events(spec.events)
    report = scenario_run(ds, spec.group, cfg, events, seed=cfg.seed)
    return {"": reporting.render_plot_data(report, cfg.histogram_bins)}


def _sweep(spec):
    cfg = _pipeline_config(spec)
    ds = _load(spec)
    rows = sensitivity_sweep(ds, _group_names(spec, ds), cfg)
    return {"": {"sweep.csv": reporting.csv_text(pd.DataFrame(rows))}}


def _correlate(spec):
    ds = _load(spec)
    table = correlation_study(ds, spec.sizes, seed=0 if spec.seed is None else spec.seed)
    return {"": {"correlation.csv": reporting.csv_text(table)}}


def execute(spec):
    """Run a parsed command; returns the exit status."""
    handlers = {
        "synth": _synth,
        "cluster": _cluster,
        "disaggregate": lambda s: _disaggregate(s, "rgvp"),
        "baseline": lambda s: _disaggregate(s, "dd"),
        "scenario": _scenario,
        "sweep": _sweep,
        "correlate": _correlate,
    }
    try:
        # everything is rendered before the first byte is written
        outputs = handlers[spec.verb](spec)
        for sub, files in sorted(outputs.items()):
            reporting.write_files(Path(spec.out) / sub, files)
    except (ValueError, OSError) as exc:  # DisaggregationError and JSONDecodeError included
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        spec = parse_command(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    return execute(spec)


if __name__ == "__main__":
    sys.exit(main())
