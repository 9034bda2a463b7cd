"""Filter chain behaviour: attenuation/passband targets, zero phase,
linearity and reference idempotence."""

import numpy as np
import pytest

from cleer.errors import ConfigError
from cleer.preprocess import (FilterSpec, average_reference, bandpass, notch)


def tone(freq, fs, seconds=5.0):
    t = np.arange(int(seconds * fs)) / fs
    return np.sin(2 * np.pi * freq * t)


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


class TestAverageReference:
    def test_identical_channels_become_zero(self):
        sig = np.tile(np.random.default_rng(0).standard_normal(100), (2, 1))
        out = average_reference(sig)
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_constant_channels(self):
        sig = np.vstack([np.ones(50), 3 * np.ones(50)])
        out = average_reference(sig)
        np.testing.assert_allclose(out[0], -1.0)
        np.testing.assert_allclose(out[1], 1.0)

    def test_column_means_zero(self):
        sig = np.random.default_rng(1).standard_normal((4, 100))
        out = average_reference(sig)
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)

    def test_idempotent(self):
        sig = np.random.default_rng(2).standard_normal((5, 200))
        once = average_reference(sig)
        twice = average_reference(once)
        np.testing.assert_allclose(once, twice, atol=1e-12)

    def test_single_channel_rejected(self):
        with pytest.raises(ConfigError):
            average_reference(np.zeros((1, 10)))


class TestFilters:
    fs = 500.0

    def bp_spec(self):
        return FilterSpec(kind="bandpass", sample_rate_hz=self.fs)

    def notch_spec(self):
        return FilterSpec(kind="notch", sample_rate_hz=self.fs)

    def test_notch_kills_60hz_tone(self):
        x = tone(60.0, self.fs)
        y = notch(x, self.notch_spec())
        assert rms(y) <= 0.1 * rms(x)

    def test_bandpass_passes_25hz_tone_within_3db(self):
        x = tone(25.0, self.fs)
        y = bandpass(x, self.bp_spec())
        mid = slice(len(x) // 4, 3 * len(x) // 4)   # avoid edge transients
        ratio = rms(y[mid]) / rms(x[mid])
        assert 10 ** (-3 / 20) <= ratio <= 10 ** (3 / 20)

    def test_bandpass_rejects_dc(self):
        x = np.ones(4000)
        y = bandpass(x, self.bp_spec())
        assert rms(y) <= 0.01

    def test_zero_phase_no_lag(self):
        x = tone(25.0, self.fs)
        y = bandpass(x, self.bp_spec())
        mid = slice(500, len(x) - 500)
        xc, yc = x[mid] - x[mid].mean(), y[mid] - y[mid].mean()
        corr = np.correlate(yc, xc, mode="full")
        lag = int(np.argmax(corr)) - (len(xc) - 1)
        assert lag == 0

    def test_linearity(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(2000)
        y = rng.standard_normal(2000)
        spec = self.bp_spec()
        lhs = bandpass(2.5 * x - 1.5 * y, spec)
        rhs = 2.5 * bandpass(x, spec) - 1.5 * bandpass(y, spec)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_multichannel_filtering(self):
        sig = np.vstack([tone(60.0, self.fs), tone(10.0, self.fs)])
        out = notch(sig, self.notch_spec())
        assert rms(out[0]) <= 0.1 * rms(sig[0])
        assert rms(out[1]) >= 0.9 * rms(sig[1])

    def test_spec_invariants(self):
        with pytest.raises(ConfigError):
            FilterSpec(kind="bandpass", sample_rate_hz=80.0)   # high > fs/2
        with pytest.raises(ConfigError):
            FilterSpec(kind="bandpass", sample_rate_hz=500.0,
                       low_hz=30.0, high_hz=10.0)
        with pytest.raises(ConfigError):
            FilterSpec(kind="notch", sample_rate_hz=100.0, notch_hz=60.0)
        with pytest.raises(ConfigError):
            FilterSpec(kind="sobel", sample_rate_hz=500.0)

    def test_wrong_spec_kind_rejected(self):
        with pytest.raises(ConfigError):
            bandpass(np.zeros(100), self.notch_spec())
        with pytest.raises(ConfigError):
            notch(np.zeros(100), self.bp_spec())
