"""Datasets, experiment runs, aggregation and benchmarks."""
from .data import (bin_index, dump_instances, filter_instances, gen_synthetic, load_instances,
                   parse_letor_file, quantile_edges, read_letor_records, write_letor_records)
from .experiment import (AggregatedCurve, ExperimentConfig, ExperimentReport, aggregate_fronts,
                         bench, bench_table, format_bench_table, normalized_front,
                         read_fronts_csv, run_experiment)
