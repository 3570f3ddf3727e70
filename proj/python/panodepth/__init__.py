"""Python access to the panoramic depth estimation core."""

import json

from . import _core
from ._core import (
    ConfigError,
    DimensionError,
    Error,
    IoError,
    NumericError,
    align_depth,
    depth_metrics,
    gradcheck,
    gradcheck_blocks,
    positional_encoding,
    read_pfm,
    room_ray_depth,
    synth_room,
    write_pfm,
    write_synthetic_dataset,
)


def preset_config(name="paper"):
    """Model configuration dict for one of the presets: paper, desk, tiny."""
    return json.loads(_core.preset_config(name))


class Model:
    """Float32 depth model; forward takes a [B,3,H,W] array in [0,1]."""

    def __init__(self, config=None, seed=0):
        config = preset_config() if config is None else config
        self._model = _core.Model(json.dumps(config), seed)

    def __call__(self, image):
        return self._model.forward(image)

    @property
    def config(self):
        return json.loads(self._model.config_json())

    def parameter_count(self):
        return self._model.parameter_count()

    def parameter_groups(self):
        return dict(self._model.parameter_groups())


def train(manifest, output_dir, model=None, **optim):
    """Trains on the manifest's train split; returns the per-step losses."""
    run = json.loads(_core.run_config())
    run["model"] = preset_config("desk") if model is None else model
    run["manifest"] = str(manifest)
    run["output_dir"] = str(output_dir)
    run["optim"].update(optim)
    return _core.train(json.dumps(run))


__all__ = [
    "ConfigError",
    "DimensionError",
    "Error",
    "IoError",
    "Model",
    "NumericError",
    "align_depth",
    "depth_metrics",
    "gradcheck",
    "gradcheck_blocks",
    "positional_encoding",
    "preset_config",
    "read_pfm",
    "room_ray_depth",
    "synth_room",
    "train",
    "write_pfm",
    "write_synthetic_dataset",
]
