import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlinlab.errors import ConfigError
from nlinlab.signals import (
    Signal,
    apply_transfer,
    band_power,
    forward_transform,
    identity_transfer,
    inverse_transform,
    psd_estimate,
    rectangular_transfer,
)
from nlinlab.transmitter import QAM16, map_symbols, random_bits, shape_pulses


def random_signal(n=1024, rate=10e9, seed=0, dual=False):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y = rng.standard_normal(n) + 1j * rng.standard_normal(n) if dual else None
    return Signal(x, rate, 0.0, y)


class TestTransforms:
    def test_dc_concentrates_in_zero_bin(self):
        s = Signal(np.ones(256, dtype=complex), 1e9)
        spec = forward_transform(s)
        energy = np.abs(spec.bins_x) ** 2
        assert energy[0] / np.sum(energy) == pytest.approx(1.0, abs=1e-12)

    def test_single_tone_single_bin(self):
        n, rate = 512, 1e9
        k = 37
        t = np.arange(n) / rate
        s = Signal(np.exp(2j * np.pi * (k * rate / n) * t), rate)
        spec = forward_transform(s)
        energy = np.abs(spec.bins_x) ** 2
        assert energy[k] / np.sum(energy) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("dual", [False, True])
    def test_roundtrip(self, dual):
        s = random_signal(dual=dual, seed=3)
        back = inverse_transform(forward_transform(s))
        assert np.max(np.abs(back.samples_x - s.samples_x)) < 1e-10
        if dual:
            assert np.max(np.abs(back.samples_y - s.samples_y)) < 1e-10

    def test_parseval(self):
        s = random_signal(seed=5, dual=True)
        spec = forward_transform(s)
        assert spec.power() == pytest.approx(s.power(), rel=1e-9)

    def test_empty_signal_rejected(self):
        with pytest.raises(ConfigError):
            Signal(np.array([], dtype=complex), 1e9)


class TestApplyTransfer:
    def test_identity(self):
        s = random_signal(seed=1)
        out = apply_transfer(s, identity_transfer())
        assert np.allclose(out.samples_x, s.samples_x, atol=1e-14)

    def test_zero(self):
        s = random_signal(seed=2)
        out = apply_transfer(s, rectangular_transfer(0.0, 0.0))
        # zero-width passband keeps only the DC bin
        assert np.sum(np.abs(forward_transform(out).bins_x[1:]) ** 2) < 1e-20

    def test_rectangular_out_of_band(self):
        s = random_signal(n=2048, seed=4)
        width = s.sample_rate / 4
        out = apply_transfer(s, rectangular_transfer(0.0, width))
        spec = forward_transform(out)
        f = spec.frequencies()
        outside = np.abs(f) > width / 2
        total = np.sum(np.abs(spec.bins_x) ** 2)
        assert np.sum(np.abs(spec.bins_x[outside]) ** 2) < 1e-12 * total

    @given(
        a=st.floats(-2, 2, allow_nan=False),
        b=st.floats(-2, 2, allow_nan=False),
        seed=st.integers(0, 1000),
    )
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, a, b, seed):
        s1 = random_signal(n=128, seed=seed)
        s2 = random_signal(n=128, seed=seed + 1)
        h = rectangular_transfer(0.0, s1.sample_rate / 3)
        combo = Signal(a * s1.samples_x + b * s2.samples_x, s1.sample_rate)
        lhs = apply_transfer(combo, h).samples_x
        rhs = a * apply_transfer(s1, h).samples_x + b * apply_transfer(s2, h).samples_x
        assert np.allclose(lhs, rhs, atol=1e-10)


class TestPsd:
    def test_white_signal_flat(self):
        s = random_signal(n=2**16, seed=7)
        freqs, psd = psd_estimate(s, resolution=s.sample_rate / 256)
        level = s.power() / s.sample_rate
        assert np.mean(psd) == pytest.approx(level, rel=0.02)
        integral = np.sum(psd) * (freqs[1] - freqs[0])
        assert integral == pytest.approx(s.power(), rel=0.02)

    def test_tone_power(self):
        n, rate = 2**14, 10e9
        t = np.arange(n) / rate
        amp = 1.7
        s = Signal(amp * np.exp(2j * np.pi * (64 * rate / n) * t), rate)
        freqs, psd = psd_estimate(s, resolution=rate / 512)
        integral = np.sum(psd) * (freqs[1] - freqs[0])
        assert integral == pytest.approx(amp**2, rel=0.02)

    def test_rrc_band_limit(self):
        # 99%+ of a 20% roll-off channel inside +-(1+r)Sr/2 = +-16.8 GHz
        sr = 28e9
        sym = map_symbols(random_bits(4 * 4096, 11), QAM16)
        sig = shape_pulses(sym, 0.2, 4, sr)
        freqs, psd = psd_estimate(sig, resolution=sr / 128)
        inside = band_power(freqs, psd, 0.0, 2 * 16.8e9)
        total = np.sum(psd) * (freqs[1] - freqs[0])
        assert inside / total > 0.99

    def test_disjoint_band_additivity(self):
        n, rate = 2**14, 10e9
        rng = np.random.default_rng(13)
        lo = rectangular_transfer(-2e9, 1.5e9)
        hi = rectangular_transfer(+2e9, 1.5e9)
        base = lambda seed: Signal(
            np.random.default_rng(seed).standard_normal(n)
            + 1j * np.random.default_rng(seed + 1).standard_normal(n),
            rate,
        )
        s1 = apply_transfer(base(1), lo)
        s2 = apply_transfer(base(2), hi)
        both = Signal(s1.samples_x + s2.samples_x, rate)
        res = rate / 256
        _, p1 = psd_estimate(s1, res)
        _, p2 = psd_estimate(s2, res)
        freqs, p12 = psd_estimate(both, res)
        df = freqs[1] - freqs[0]
        assert np.sum(np.abs(p12 - p1 - p2)) * df < 0.02 * np.sum(p12) * df

    def test_resolution_validation(self):
        s = random_signal(n=256)
        with pytest.raises(ConfigError):
            psd_estimate(s, resolution=s.sample_rate)
        with pytest.raises(ConfigError):
            psd_estimate(s, resolution=s.sample_rate / 1024)
