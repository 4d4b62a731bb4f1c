"""Disaggregate behind-the-meter solar generation and native demand from
net-demand smart-meter data."""

from .correlation import correlation_study, pearson
from .dataset import FeederDataset, PowerSeries, aggregate_group, ingest_csv, load_groups, to_frame, write_csv
from .errors import (
    ConfigError,
    DisaggregationError,
    DuplicateError,
    GapError,
    GroupError,
    NumericsError,
    ParseError,
    SpanError,
)
from .exemplar import ExemplarLibrary, build_candidate_library, compose, demand_profiles, solar_profiles
from .numerics import kmeans, solve_normal_equations, symmetric_eigen
from .pipeline import (
    DisaggregationReport,
    PipelineConfig,
    evaluate_mape,
    prepare_library,
    run_dd_baseline,
    run_stream,
    scenario_run,
    sensitivity_sweep,
)
from .reporting import emit_plot_data
from .rgvp import WeightState, init_weights, potential, softmax_weights
from .scenario import ScenarioEvent, apply_scenario, load_events
from .spectral import cluster_profiles, select_cluster_count
from .sss import SeparationResult, separate
from .synthetic import SynthConfig, generate_synthetic_feeder

__version__ = "0.1.0"
