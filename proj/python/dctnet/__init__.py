"""Trimodal (RGB, depth, optical flow) video saliency network.

Configs and clip specs are plain dicts with the same keys as the JSON
files the command-line tool reads.
"""

import json

from . import _dctnet
from ._dctnet import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    NumericalError,
    conv2d,
    flow_to_color,
    gradcheck,
    mae,
    max_f_measure,
    read_dataset,
    s_measure,
    softmax_rows,
)

__all__ = [
    "ConfigError", "ContractError", "DataError", "DimensionError", "NumericalError",
    "Model", "conv2d", "flow_to_color", "generate_clip", "gradcheck", "mae",
    "max_f_measure", "read_dataset", "s_measure", "softmax_rows",
]


def generate_clip(**spec):
    """Render a synthetic clip; returns a list of {rgb, depth, flow, gt} arrays."""
    return _dctnet.generate_clip(json.dumps(spec))


class Model:
    def __init__(self, **config):
        self._impl = _dctnet.Model(json.dumps(config))

    @classmethod
    def load(cls, path):
        m = cls.__new__(cls)
        m._impl = _dctnet.Model.load(str(path))
        return m

    @property
    def config(self):
        return json.loads(self._impl.config_json)

    @property
    def parameter_count(self):
        return self._impl.parameter_count

    def forward(self, rgb, depth, flow, train=False):
        """Side-output logits, finest first."""
        return self._impl.forward(rgb, depth, flow, train)

    def fit(self, clips):
        """Train on a list of clip spec dicts; returns the per-step losses."""
        return self._impl.fit([json.dumps(c) for c in clips])

    def predict(self, clip):
        return self._impl.predict(json.dumps(clip))

    def evaluate(self, clips):
        return self._impl.evaluate([json.dumps(c) for c in clips])

    def save(self, path, step=0):
        self._impl.save(str(path), step)
