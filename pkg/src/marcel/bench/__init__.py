"""Experiment harness: splits, training, repeats, persistence and reporting."""

from marcel.bench.bundle import load_bundle, save_bundle
from marcel.bench.config import ExperimentConfig, config_from_dict, load_config
from marcel.bench.data import dataset_statistics, prepare_dataset, resolve_manifest
from marcel.bench.experiment import repeat_seeds, run_experiment, run_once, select_best
from marcel.bench.report import format_table, render_figure, summarize
from marcel.bench.split import SplitSpec, split_dataset
from marcel.bench.train import ForestPredictor, History, evaluate_mae, fit, model_predictions, train

__all__ = [
    "ExperimentConfig", "ForestPredictor", "History", "SplitSpec", "config_from_dict",
    "dataset_statistics", "evaluate_mae", "fit", "format_table", "load_bundle", "load_config",
    "model_predictions", "prepare_dataset", "render_figure", "repeat_seeds", "resolve_manifest",
    "run_experiment", "run_once", "save_bundle", "select_best", "split_dataset", "summarize",
    "train",
]
