"""Multi-label zero-shot audio tagging with temporal attention over segment scores."""

from .dataset import Dataset, Sample, SynthSpec, generate_synthetic, load_dataset, save_dataset
from .model import HyperParams, ModelParams, init_params
from .splitter import split_folds
from .trainer import TrainConfig, run_seeds, train

__version__ = "0.1.0"
