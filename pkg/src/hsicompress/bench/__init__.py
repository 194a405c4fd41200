from .config import SCHEMA_VERSION, ConfigError, ExperimentConfig, all_methods, load_config
from .latency import LatencyStats, measure_latency
from .report import (HEADER, ReportRow, RunManifest, family_of, read_csv, render_markdown,
                     write_csv, write_markdown)
from .runner import (DataBundle, Experiment, evaluate_any, load_any, load_data, load_dataset,
                     method_label, model_size, run_experiment)
