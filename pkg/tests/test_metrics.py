import numpy as np
import pytest

from nlinlab.errors import ConfigError, ZeroNoiseError
from nlinlab.metrics import (
    NoiseReport,
    PhaseTrace,
    average_reports,
    circular_noise_power,
    measure_frame,
    monitor_signal,
    noise_power,
    phase_acf,
    phase_noise_power,
    rotate_scale,
    separate_phase_circular,
)
from nlinlab.receiver import SymbolFrame
from nlinlab.transmitter import QAM16, QPSK, map_symbols, random_bits

SR = 28e9


def qam_frame(n=2**14, seed=0, n_pol=2):
    tx = np.stack([
        map_symbols(random_bits(4 * n, seed + p), QAM16) for p in range(n_pol)
    ])
    return tx


def synthetic_frame(
    n=2**14,
    seed=0,
    phase_sigma=0.0,
    phase_block=100,
    circ_sigma=0.0,
    n_pol=2,
):
    """Frame with block-correlated phase noise and circular noise.

    Returns (frame, per-pol truths dict) where the truths are the
    realized (empirical) variances the estimator should recover.
    """
    rng = np.random.default_rng(seed)
    tx = np.stack([
        map_symbols(random_bits(4 * n, seed + 17 * p + 1), QAM16) for p in range(n_pol)
    ])
    theta = np.zeros((n_pol, n))
    if phase_sigma > 0:
        blocks = int(np.ceil(n / phase_block))
        for p in range(n_pol):
            vals = rng.normal(0.0, phase_sigma, blocks)
            theta[p] = np.repeat(vals, phase_block)[:n]
            theta[p] -= theta[p].mean()
    noise = np.zeros((n_pol, n), dtype=complex)
    if circ_sigma > 0:
        noise = circ_sigma / np.sqrt(2) * (
            rng.standard_normal((n_pol, n)) + 1j * rng.standard_normal((n_pol, n))
        )
    rx = tx * np.exp(-1j * theta) + noise
    frame = SymbolFrame(tx, rx, SR)
    truths = {
        "p_phase": SR * float(np.mean([np.var(theta[p]) * np.mean(np.abs(tx[p]) ** 2)
                                       for p in range(n_pol)])),
        "p_circular": SR * float(np.mean([np.var(noise[p]) for p in range(n_pol)])),
    }
    return frame, truths


class TestNoisePower:
    def test_clean_frame(self):
        tx = np.stack([map_symbols(random_bits(4 * 512, 1), QAM16)] * 2)
        frame = SymbolFrame(tx, tx.copy(), SR)
        assert noise_power(frame) == 0.0

    def test_white_noise_variance(self):
        frame, truths = synthetic_frame(seed=3, circ_sigma=0.05)
        sigma_rel = np.sqrt(2.0 / frame.n_symbols)
        expected = truths["p_circular"]
        assert noise_power(frame) == pytest.approx(expected, rel=3 * sigma_rel)

    def test_constant_small_phase(self):
        theta0 = 0.01
        tx = np.stack([map_symbols(random_bits(4 * 4096, 5), QAM16)] * 2)
        frame = SymbolFrame(tx, tx * np.exp(1j * theta0), SR)
        # small-angle oracle: var(x (e^{i t} - 1)) = (2 - 2 cos t) var(x)
        expected = SR * (2 - 2 * np.cos(theta0)) * np.mean([np.var(tx[p]) for p in range(2)])
        assert noise_power(frame) == pytest.approx(expected, rel=1e-9)
        assert noise_power(frame) == pytest.approx(SR * theta0**2, rel=2e-3)


class TestRotateScale:
    def test_identity(self):
        tx = np.stack([map_symbols(random_bits(4 * 256, 7), QAM16)] * 2)
        frame = SymbolFrame(tx, tx.copy(), SR)
        assert np.allclose(rotate_scale(frame), 1.0)

    def test_pure_rotation(self):
        tx = np.stack([map_symbols(random_bits(4 * 256, 9), QAM16)] * 2)
        frame = SymbolFrame(tx, tx * np.exp(-1j * 0.3), SR)
        assert np.allclose(rotate_scale(frame), np.exp(-1j * 0.3))

    def test_additive_noise_zero_mean(self):
        frame, _ = synthetic_frame(seed=11, circ_sigma=0.05)
        rotated = rotate_scale(frame)
        assert abs(np.mean(rotated - 1.0)) < 5.0 / np.sqrt(frame.n_symbols)


class TestMonitorSignal:
    def test_pure_circular_negative_rising(self):
        frame, _ = synthetic_frame(seed=13, circ_sigma=0.05)
        m_small = monitor_signal(frame, 2)
        m_large = monitor_signal(frame, 64)
        assert np.all(m_small < 0)
        assert np.all(m_large > m_small)
        assert np.all(m_large < 0.05)

    def test_block_phase_crosses_before_block_length(self):
        frame, _ = synthetic_frame(seed=15, phase_sigma=0.05, phase_block=50)
        crossed = None
        for window in range(2, 50, 2):
            if np.all(monitor_signal(frame, window) > 0):
                crossed = window
                break
        assert crossed is not None and crossed < 50

    def test_zero_noise_reported(self):
        tx = np.stack([map_symbols(random_bits(4 * 256, 17), QAM16)] * 2)
        frame = SymbolFrame(tx, tx.copy(), SR)
        with pytest.raises(ZeroNoiseError):
            monitor_signal(frame, 4)

    def test_window_validation(self):
        frame, _ = synthetic_frame(n=256, seed=19, circ_sigma=0.01)
        with pytest.raises(ConfigError):
            monitor_signal(frame, 1)
        with pytest.raises(ConfigError):
            monitor_signal(frame, 3)


class TestSeparation:
    def test_recovers_known_decomposition(self):
        frame, truths = synthetic_frame(seed=21, phase_sigma=0.06, phase_block=100,
                                        circ_sigma=0.04)
        sep = separate_phase_circular(frame)
        p_phase = phase_noise_power(sep.phase, frame)
        p_circ = circular_noise_power(sep.circular, SR)
        assert p_phase == pytest.approx(truths["p_phase"], rel=0.10)
        assert p_circ == pytest.approx(truths["p_circular"], rel=0.10)
        assert not sep.exhausted
        assert sep.n_opt < 100

    def test_pure_circular_exhausts(self):
        frame, truths = synthetic_frame(seed=23, circ_sigma=0.05)
        sep = separate_phase_circular(frame, n_max=frame.n_symbols // 8)
        assert sep.exhausted
        assert sep.n_opt == frame.n_symbols // 8
        p_phase = phase_noise_power(sep.phase, frame)
        assert p_phase < 0.05 * noise_power(frame)

    def test_monitor_monotone_on_model_frames(self):
        frame, _ = synthetic_frame(seed=25, phase_sigma=0.04, phase_block=100,
                                   circ_sigma=0.04)
        values = [float(np.sum(monitor_signal(frame, w))) for w in range(2, 200, 2)]
        diffs = np.diff(values)
        assert np.all(diffs > -0.02)  # statistical margin

    def test_closure(self):
        frame, _ = synthetic_frame(seed=27, phase_sigma=0.04, phase_block=100,
                                   circ_sigma=0.04)
        sep = separate_phase_circular(frame)
        p_nli = noise_power(frame)
        p_phase = phase_noise_power(sep.phase, frame)
        p_circ = circular_noise_power(sep.circular, SR)
        assert p_phase + p_circ == pytest.approx(p_nli, rel=0.02)

    def test_rotation_invariance(self):
        frame, _ = synthetic_frame(seed=29, phase_sigma=0.03, phase_block=100,
                                   circ_sigma=0.03)
        rotated = SymbolFrame(frame.tx_symbols * np.exp(1j * 0.7),
                              frame.rx_symbols * np.exp(1j * 0.7), SR)
        a = separate_phase_circular(frame)
        b = separate_phase_circular(rotated)
        assert a.n_opt == b.n_opt
        assert np.allclose(a.phase.delta_theta, b.phase.delta_theta, atol=1e-9)

    def test_deterministic(self):
        frame, _ = synthetic_frame(seed=31, phase_sigma=0.03, circ_sigma=0.03)
        a = separate_phase_circular(frame)
        b = separate_phase_circular(frame)
        assert a.n_opt == b.n_opt
        assert np.array_equal(a.circular, b.circular)


class TestPhaseNoisePower:
    def test_zero_trace(self):
        tx = np.stack([map_symbols(random_bits(4 * 256, 33), QAM16)] * 2)
        frame = SymbolFrame(tx, tx.copy(), SR)
        trace = PhaseTrace(np.zeros((2, 256)))
        assert phase_noise_power(trace, frame) == 0.0

    def test_white_phase(self):
        rng = np.random.default_rng(35)
        tx = np.stack([map_symbols(random_bits(4 * 8192, 37), QAM16)] * 2)
        frame = SymbolFrame(tx, tx.copy(), SR)
        theta = rng.normal(0, 0.02, (2, 8192))
        trace = PhaseTrace(theta)
        expected = SR * np.mean([np.var(theta[p]) * np.mean(np.abs(tx[p]) ** 2)
                                 for p in range(2)])
        assert phase_noise_power(trace, frame) == pytest.approx(expected, rel=1e-12)

    def test_alternating_phase(self):
        theta0 = 0.05
        tx = np.stack([map_symbols(random_bits(4 * 1024, 39), QAM16)] * 2)
        frame = SymbolFrame(tx, tx.copy(), SR)
        theta = np.tile(np.array([theta0, -theta0]), 512)[None, :].repeat(2, axis=0)
        expected = SR * theta0**2 * np.mean(np.abs(tx) ** 2)
        assert phase_noise_power(PhaseTrace(theta), frame) == pytest.approx(expected, rel=1e-9)


class TestPhaseAcf:
    def test_constant_trace(self):
        trace = PhaseTrace(np.full((1, 1024), 0.2))
        acf = phase_acf(trace, 50)
        assert np.allclose(acf, 1.0)

    def test_white_trace(self):
        rng = np.random.default_rng(41)
        trace = PhaseTrace(rng.normal(0, 1, (1, 2**15)))
        acf = phase_acf(trace, 20)
        assert acf[0] == 1.0
        assert np.max(np.abs(acf[1:])) < 5.0 / np.sqrt(2**15)

    def test_ar1_trace(self):
        rho = 0.8
        n = 2**16
        rng = np.random.default_rng(43)
        x = np.empty(n)
        x[0] = rng.normal()
        eps = rng.normal(0, 1, n)
        for i in range(1, n):
            x[i] = rho * x[i - 1] + eps[i]
        acf = phase_acf(PhaseTrace(x[None, :]), 10)
        for lag in range(1, 11):
            assert acf[lag] == pytest.approx(rho**lag, abs=0.03)

    def test_max_lag_validation(self):
        trace = PhaseTrace(np.zeros((1, 64)))
        with pytest.raises(ConfigError):
            phase_acf(trace, 16)


class TestReports:
    def _report(self, p_nli=1e-6, p_phase=6e-7, p_circ=4e-7, **meta):
        return NoiseReport.from_powers(p_nli, p_phase, p_circ, 22, 80e3,
                                       scenario="s", **meta)

    def test_single_report_identity(self):
        rep = self._report()
        avg = average_reports([rep])
        assert avg.p_nli == rep.p_nli
        assert avg.cnr_percent == rep.cnr_percent
        assert avg.spread_pct == 0.0

    def test_identical_pair_zero_spread(self):
        avg = average_reports([self._report(), self._report()])
        assert avg.spread_pct == 0.0
        assert avg.p_phase == 6e-7

    def test_mixed_scenarios_rejected(self):
        a = self._report()
        b = NoiseReport.from_powers(1e-6, 5e-7, 5e-7, 10, 80e3, scenario="other")
        with pytest.raises(ConfigError):
            average_reports([a, b])

    def test_cnr_range(self):
        rep = NoiseReport.from_powers(1e-6, 0.0, 2e-6, 5, 80e3)
        assert rep.cnr_percent == 100.0

    def test_measure_frame_scaling(self):
        frame, truths = synthetic_frame(seed=45, phase_sigma=0.04, phase_block=100,
                                        circ_sigma=0.04)
        p_ref = 2e-3
        rep = measure_frame(frame, distance=80e3, reference_power=p_ref)
        expected = (truths["p_phase"] + truths["p_circular"]) * p_ref / SR
        assert rep.p_nli == pytest.approx(expected, rel=0.05)
        assert 0 <= rep.cnr_percent <= 100
