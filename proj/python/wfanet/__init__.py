"""Wavelet-domain pansharpening network with a C++ core.

Arrays are float32 numpy arrays shaped (bands, height, width).
"""

import json

from ._wfanet import (
    ConfigError,
    ContractError,
    DimensionError,
    Error,
    FormatError,
    NumericError,
    ValidationError,
    dwt2,
    ergas,
    gradient_battery,
    hqnr,
    idwt2,
    load_raster,
    make_sample_pair,
    psnr,
    q2n,
    sam,
    save_raster,
    synth_scene,
    wald_degrade,
)
from ._wfanet import _full_report, _Network, _reduced_report, _train

__all__ = [
    "ConfigError", "ContractError", "DimensionError", "Error", "FormatError", "Network",
    "NumericError", "ValidationError", "dwt2", "ergas", "full_report", "gradient_battery",
    "hqnr", "idwt2", "load_raster", "make_sample_pair", "psnr", "q2n", "reduced_report",
    "sam", "save_raster", "synth_scene", "train", "wald_degrade",
]


class Network:
    """Seeded network; `config` overrides the default fields."""

    def __init__(self, config=None, *, _impl=None):
        self._impl = _impl if _impl is not None else _Network(json.dumps(config or {}))

    @classmethod
    def load(cls, path):
        return cls(_impl=_Network.load(str(path)))

    def save(self, path):
        self._impl.save(str(path))

    def forward(self, pan, lrms):
        return self._impl.forward(pan, lrms)

    __call__ = forward

    def fuse(self, pan, lrms):
        """Forward pass clamped to [0, 1]."""
        return self._impl.fuse(pan, lrms)

    @property
    def config(self):
        return json.loads(self._impl.config_json)

    @property
    def param_names(self):
        return self._impl.param_names

    @property
    def param_count(self):
        return self._impl.param_count

    @property
    def checksum(self):
        return self._impl.checksum


def train(samples, network=None, training=None):
    """Trains on (pan, lrms, gt) tuples. Returns (Network, report dict)."""
    impl, report = _train(json.dumps(network or {}), json.dumps(training or {}), list(samples))
    return Network(_impl=impl), json.loads(report)


def reduced_report(ref, test, ratio=4):
    return json.loads(_reduced_report(ref, test, ratio))


def full_report(fused, ms, pan, ratio=4):
    return json.loads(_full_report(fused, ms, pan, ratio))
