# SPDX-License-Identifier: Apache-2.0
"""Continuous-time mmWave channel prediction with tensor neural ODEs.

Matrices cross the boundary as 2-D ``complex128`` NumPy arrays; model
parameters are dicts of such arrays keyed by tensor name. Config
overrides are plain dicts using the same keys as the CLI config file.
"""

from ._ctpred import (
    ConfigError,
    Dataset,
    Error,
    IoError,
    NumericError,
    Sample,
    ShapeError,
    achievable_rate,
    config_items,
    count_flops,
    generate_dataset,
    gradcheck,
    head_float_count,
    init_params,
    interpolate_slots,
    load_dataset,
    loss_and_grad,
    nmse_loss,
    predict,
    subcarrier_rate,
    to_db,
    train_tnode,
    vanilla_head_float_count,
    zf_precoder,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "Error",
    "IoError",
    "NumericError",
    "Sample",
    "ShapeError",
    "achievable_rate",
    "config_items",
    "count_flops",
    "generate_dataset",
    "gradcheck",
    "head_float_count",
    "init_params",
    "interpolate_slots",
    "load_dataset",
    "loss_and_grad",
    "nmse_loss",
    "predict",
    "subcarrier_rate",
    "to_db",
    "train_tnode",
    "vanilla_head_float_count",
    "zf_precoder",
]
