"""Tests for the NLMS echo canceller"""
import math

import numpy as np
import pytest

from bargebench.aec import NlmsState, cancel_echo, erle, misalignment_db, nlms_process
from bargebench.audio.wav import Waveform
from bargebench.errors import ConfigError, DegenerateSignalError, NumericError


@pytest.fixture
def echo_pair():
    """Provide white-noise reference, its echo through an 8-tap path, and the path"""
    g = np.random.default_rng(8)
    ref = g.normal(0.0, 0.3, 16000)
    path = g.normal(0.0, 0.5, 8) * np.exp(-0.3 * np.arange(8))
    mic = np.convolve(ref, path)[:16000]
    return Waveform(mic), Waveform(ref), path


class TestNlms:
    """Test NLMS adaptation"""

    def test_identifies_short_path(self, echo_pair):
        """Test the filter converges to a known 8-tap echo path"""
        mic, ref, path = echo_pair
        residual, state = nlms_process(mic, ref, taps=8, step=0.5)
        assert misalignment_db(state.weights, path) < -30.0
        assert erle(mic, residual, start=12000) > 20.0

    def test_longer_filter_still_converges(self, echo_pair):
        """Test a 64-tap filter identifies the 8-tap path within 5000 samples"""
        mic, ref, path = echo_pair
        _, state = nlms_process(Waveform(mic.samples[:5000]), Waveform(ref.samples[:5000]), taps=64, step=0.5)
        assert misalignment_db(state.weights, path) < -30.0

    def test_zero_reference_passes_mic_through(self, echo_pair):
        """Test a silent reference leaves the mic signal untouched"""
        mic, _, _ = echo_pair
        residual, state = nlms_process(mic, Waveform.silence(len(mic)), taps=16)
        np.testing.assert_array_equal(residual.samples, mic.samples)
        assert not np.any(state.weights)

    def test_uncorrelated_reference(self):
        """Test an unrelated reference leaves residual power within 1 dB of the mic"""
        for trial in range(10):
            g = np.random.default_rng(100 + trial)
            mic = Waveform(g.normal(0.0, 0.2, 16000))
            ref = Waveform(g.normal(0.0, 0.2, 16000))
            residual, _ = nlms_process(mic, ref, taps=32, step=0.2)
            assert abs(erle(mic, residual)) <= 1.0

    def test_length_mismatch(self):
        """Test mic and reference must be the same length"""
        with pytest.raises(ConfigError):
            nlms_process(Waveform(np.ones(10)), Waveform(np.ones(11)), taps=4)

    @pytest.mark.parametrize("which", ["mic", "reference"])
    @pytest.mark.parametrize("bad", [np.nan, np.inf])
    def test_non_finite_input_rejected(self, echo_pair, which, bad):
        """Test a NaN or Inf sample in either input raises before any adaptation"""
        mic, ref, _ = echo_pair
        target = mic if which == "mic" else ref
        target.samples[100] = bad
        with pytest.raises(NumericError) as e:
            nlms_process(mic, ref, taps=8)
        assert e.value.name == which

    @pytest.mark.parametrize("taps,step,eps", [(0, 0.5, 1e-6), (8, 0.0, 1e-6), (8, 2.5, 1e-6), (8, 0.5, 0.0)])
    def test_parameter_ranges(self, taps, step, eps):
        """Test filter length, step size and regularizer limits"""
        with pytest.raises(ConfigError):
            NlmsState.initial(taps, step, eps)

    def test_history_holds_latest_reference(self, echo_pair):
        """Test the final state's history starts with the newest reference sample"""
        mic, ref, _ = echo_pair
        _, state = nlms_process(mic, ref, taps=4)
        np.testing.assert_array_equal(state.history, ref.samples[::-1][:4])

    def test_cancel_echo_reads_config(self, echo_pair):
        """Test the front-end helper takes settings from an aec section"""
        mic, ref, _ = echo_pair
        a = cancel_echo(mic, ref, {"enabled": True, "taps": 8, "step": 0.5, "eps": 1e-6})
        b, _ = nlms_process(mic, ref, taps=8, step=0.5, eps=1e-6)
        np.testing.assert_array_equal(a.samples, b.samples)


class TestEchoMetrics:
    """Test ERLE and misalignment"""

    def test_erle_identity(self):
        """Test an untouched signal has 0 dB ERLE and a cancelled one infinite ERLE"""
        mic = Waveform(np.ones(8))
        assert erle(mic, mic) == pytest.approx(0.0)
        assert erle(mic, Waveform.silence(8)) == math.inf

    def test_erle_silent_mic(self):
        """Test ERLE is undefined for a silent mic"""
        with pytest.raises(DegenerateSignalError):
            erle(Waveform.silence(8), Waveform.silence(8))

    def test_misalignment_zero_pads(self):
        """Test the shorter vector is zero-padded"""
        assert misalignment_db([1.0, 0.0], [1.0]) == -math.inf
        assert misalignment_db([0.5], [1.0, 0.0]) == pytest.approx(10 * math.log10(0.25))

    def test_misalignment_zero_path(self):
        """Test an all-zero true path is rejected"""
        with pytest.raises(DegenerateSignalError):
            misalignment_db([1.0], [0.0])
