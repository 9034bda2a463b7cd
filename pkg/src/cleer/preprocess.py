"""Signal conditioning ahead of segmentation: common average reference,
bandpass and notch filtering.

Filters are IIR designs applied forward-backward (zero phase) per channel.
Apply them to whole recordings, not individual windows, to keep edge
transients away from the analysis windows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import ConfigError

DEFAULT_BAND = (1.0, 49.0)
DEFAULT_NOTCH_HZ = 60.0
DEFAULT_ORDER = 4
DEFAULT_NOTCH_Q = 30.0


@dataclass(frozen=True)
class FilterSpec:
    kind: str                       # "bandpass" or "notch"
    sample_rate_hz: float
    low_hz: float = DEFAULT_BAND[0]
    high_hz: float = DEFAULT_BAND[1]
    notch_hz: float = DEFAULT_NOTCH_HZ
    order: int = DEFAULT_ORDER
    q: float = DEFAULT_NOTCH_Q

    def __post_init__(self):
        nyq = self.sample_rate_hz / 2.0
        if self.kind not in ("bandpass", "notch"):
            raise ConfigError(f"unknown filter kind {self.kind!r}")
        if self.kind == "bandpass" and not (0 < self.low_hz < self.high_hz < nyq):
            raise ConfigError(
                f"need 0 < low < high < fs/2, got ({self.low_hz}, {self.high_hz})"
                f" at fs={self.sample_rate_hz}")
        if self.kind == "notch" and not (0 < self.notch_hz < nyq):
            raise ConfigError(
                f"notch frequency {self.notch_hz} outside (0, {nyq})")
        if self.order < 1:
            raise ConfigError(f"filter order must be >= 1, got {self.order}")


def average_reference(sig):
    """Subtract the across-channel mean from every channel at each sample."""
    sig = np.asarray(sig, dtype=np.float64)
    if sig.ndim != 2 or sig.shape[0] < 2:
        raise ConfigError(
            f"average reference needs a (C>=2, S) signal, got shape {sig.shape}")
    return sig - sig.mean(axis=0, keepdims=True)


def _check_stable(b, a):
    poles = np.roots(a)
    if np.any(np.abs(poles) >= 1.0):
        raise ConfigError(
            f"unstable filter design: pole magnitude {np.abs(poles).max():.6f}")


def _check_stable_sos(sos):
    for section in sos:
        _check_stable(section[:3], section[3:])


def bandpass(sig, spec):
    """Zero-phase Butterworth bandpass, per channel.

    Runs as cascaded second-order sections: the low normalized cutoff makes
    the single transfer-function form numerically fragile.
    """
    if spec.kind != "bandpass":
        raise ConfigError(f"bandpass() called with a {spec.kind!r} spec")
    sos = sps.butter(spec.order, [spec.low_hz, spec.high_hz],
                     btype="bandpass", output="sos", fs=spec.sample_rate_hz)
    _check_stable_sos(sos)
    return sps.sosfiltfilt(sos, np.asarray(sig, dtype=np.float64), axis=-1)


def notch(sig, spec):
    """Zero-phase narrow-band notch (resonator design), per channel."""
    if spec.kind != "notch":
        raise ConfigError(f"notch() called with a {spec.kind!r} spec")
    b, a = sps.iirnotch(spec.notch_hz, spec.q, fs=spec.sample_rate_hz)
    _check_stable(b, a)
    return sps.filtfilt(b, a, np.asarray(sig, dtype=np.float64), axis=-1)
