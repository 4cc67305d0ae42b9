"""Python bindings for the minimalist sharpness toolkit.

Arrays are numpy float64; X is N x d, y has length N. Configs are the same
TOML-style text the command-line tool reads and writes.
"""

from ._core import (
    DivergenceError,
    IngestionError,
    InvalidInput,
    UndefinedQuantity,
    bounds,
    default_config,
    difficulty,
    eos_demo_config,
    eos_demo_dataset,
    imbalance_terms,
    layer_imbalance,
    load_csv,
    loss,
    run,
    sharpness,
    synth_gaussian,
    synth_minimal_data,
    train,
    v1_star_sq,
    verify,
    verify_suites,
)

__all__ = [
    "DivergenceError",
    "IngestionError",
    "InvalidInput",
    "UndefinedQuantity",
    "bounds",
    "default_config",
    "difficulty",
    "eos_demo_config",
    "eos_demo_dataset",
    "imbalance_terms",
    "layer_imbalance",
    "load_csv",
    "loss",
    "run",
    "sharpness",
    "synth_gaussian",
    "synth_minimal_data",
    "train",
    "v1_star_sq",
    "verify",
    "verify_suites",
]
