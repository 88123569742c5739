"""Configuration, orchestration, persistence and the command line."""

from .config import SCHEMA_VERSION, ConfigError, RunConfig, config_from_mapping, load_config
from .run import RunRecord, fit_scaling, load_record, replay, run, save_record
