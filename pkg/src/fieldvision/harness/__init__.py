"""Benchmark harness: configuration, datasets, metrics and the command line."""

from .commands import Result, cmd_calibrate, cmd_detect, cmd_evaluate, cmd_localize, cmd_render, cmd_train_ball
from .config import ConfigError, RunConfig, load_config, parse_config, save_config
from .dataset import Dataset, DatasetError
