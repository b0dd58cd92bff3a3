from .config import ConfigError, RunConfig, config_hash, load_config, parse_config, serialize_config
from .runner import emit_plot_csv, run_experiment, sweep
