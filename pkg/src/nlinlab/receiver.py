"""Receiver chain isolating cross- and multi-channel interference.

Order of operations: rectangular channel extraction (with exact
spectral resampling on the periodic block), single-channel digital
backpropagation (removes accumulated dispersion and self-channel
interference), matched RRC filtering, data-aided frequency-domain
equalization with loadable coefficients, symbol-rate decimation and
alignment against the transmitted symbols.

The equalizer is estimated per polarization pair on a 128-bin grid
(64 training symbols at 2 samples/symbol) from the time-multiplexed
CAZAC header: interior header blocks are circularly identical to their
neighbors, so a per-bin zero-forcing ratio is exact for any channel
whose memory is short compared to one block.  PMD is deliberately not
inverted in backpropagation (a receiver cannot know it); the calibrated
equalizer removes it instead.

Coefficient store format (versioned, little-endian): magic ``NLFD``,
u32 version, i64 seed, u32 span count, u32 bin count, f64 sample rate,
then per bin a u32 bin index followed by the 2x2 complex equalizer
entries as eight f64 values (re/im of W00, W01, W10, W11).
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import AlignmentError, CalibrationMissing, ConfigError
from .fiber import PmdRealization, StepControl, propagate_span, amplify
from .link import LinkConfig
from .signals import Signal
from .transmitter import (
    ChannelPlan,
    TRAINING_BLOCKS,
    TRAINING_BLOCK_LENGTH,
    build_channel_waveform,
    matched_filter,
    shape_pulses,
    training_header,
)

DSP_SAMPLES_PER_SYMBOL = 2
FDE_TAPS = TRAINING_BLOCK_LENGTH * DSP_SAMPLES_PER_SYMBOL  # 128
_STORE_MAGIC = b"NLFD"
_STORE_VERSION = 1


@dataclass(frozen=True)
class FdeCoefficients:
    """2x2 frequency-domain equalizer on a coarse bin grid.

    ``response[k]`` is the 2x2 matrix applied to the received Jones
    vector at bin frequency ``fftfreq(n_bins, 1/sample_rate)[k]``.
    """

    response: np.ndarray  # (n_bins, 2, 2) complex
    sample_rate: float
    seed: int = 0
    span_count: int = 0

    @property
    def n_bins(self) -> int:
        return self.response.shape[0]


@dataclass(frozen=True)
class SymbolFrame:
    """Aligned transmitted/received payload symbols at 1 sample/symbol."""

    tx_symbols: np.ndarray  # (n_pol, n)
    rx_symbols: np.ndarray  # (n_pol, n), unit mean power per polarization
    symbol_rate: float

    def __post_init__(self):
        tx = np.atleast_2d(np.asarray(self.tx_symbols, dtype=complex))
        rx = np.atleast_2d(np.asarray(self.rx_symbols, dtype=complex))
        if tx.shape != rx.shape:
            raise ConfigError("tx and rx symbol arrays must have equal shape")
        object.__setattr__(self, "tx_symbols", tx)
        object.__setattr__(self, "rx_symbols", rx)

    @property
    def n_pol(self) -> int:
        return self.tx_symbols.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.tx_symbols.shape[1]


def extract_channel(
    signal: Signal,
    center: float,
    bandwidth: float,
    output_rate: Optional[float] = None,
) -> Signal:
    """Brick-wall extraction of one channel, optionally resampled.

    ``center`` is snapped onto the FFT bin grid (the same snapping the
    multiplexer uses).  Resampling is exact on the periodic block and
    requires ``n_samples * output_rate / sample_rate`` to be integer.
    """
    if bandwidth <= 0:
        raise ConfigError("extraction bandwidth must be positive")
    if abs(center) + bandwidth / 2.0 > signal.sample_rate / 2.0:
        raise ConfigError("extraction band outside the sampled range")
    n = signal.n_samples
    df = signal.sample_rate / n
    shift_bins = int(round(center / df))
    spec = np.fft.fft(signal.fields(), axis=-1)
    spec = np.roll(spec, -shift_bins, axis=-1)
    freqs = signal.frequencies()
    spec[:, np.abs(freqs) > bandwidth / 2.0] = 0.0
    if output_rate is None or output_rate == signal.sample_rate:
        fields = np.fft.ifft(spec, axis=-1)
        return Signal(fields[0], signal.sample_rate,
                      signal.center_frequency + shift_bins * df,
                      fields[1] if fields.shape[0] == 2 else None)
    m_float = n * output_rate / signal.sample_rate
    m = int(round(m_float))
    if abs(m - m_float) > 1e-9 or m < 2:
        raise ConfigError("output rate is not commensurate with the block")
    if bandwidth > output_rate:
        raise ConfigError("extraction bandwidth exceeds the output rate")
    out = np.zeros((spec.shape[0], m), dtype=complex)
    half = m // 2
    out[:, :half] = spec[:, :half]
    out[:, -half:] = spec[:, -half:]
    fields = np.fft.ifft(out, axis=-1) * (m / n)
    return Signal(fields[0], output_rate,
                  signal.center_frequency + shift_bins * df,
                  fields[1] if fields.shape[0] == 2 else None)


def backpropagate(signal: Signal, link: LinkConfig,
                  step: StepControl = StepControl()) -> Signal:
    """Digitally propagate the extracted channel back along the link.

    Applies the split-step with inverted attenuation, dispersion and
    Kerr coefficient and reversed span/amplifier order.  PMD stays in
    the signal; the equalizer takes care of it.
    """
    out = signal
    for _ in range(link.span_count):
        out = amplify(out, -link.amplifier_gain_db)
        out = propagate_span(out, link.fiber, step, pmd=None, invert=True)
    return out


def reference_header_waveform(plan: ChannelPlan) -> np.ndarray:
    """Header-region waveform fields the equalizer trains against.

    This is the raised-cosine response (transmit RRC times matched RRC)
    of the training symbols alone, sampled at 2 samples/symbol; interior
    blocks of this waveform match what an undistorted receiver sees.
    """
    header = training_header()
    # Shaping a frame consisting of the header repeated periodically
    # reproduces the interior-block neighborhoods exactly.
    shaped = shape_pulses(header, plan.roll_off, DSP_SAMPLES_PER_SYMBOL, plan.symbol_rate)
    filtered = matched_filter(shaped, plan.roll_off, plan.symbol_rate)
    return filtered.fields()


def locate_header(signal: Signal, reference: np.ndarray) -> int:
    """Integer sample offset of the training header via cross-correlation."""
    fields = signal.fields()
    n = fields.shape[1]
    ref = np.zeros((reference.shape[0], n), dtype=complex)
    ref[:, : reference.shape[1]] = reference
    metric = np.zeros(n)
    for rx in fields:
        rx_spec = np.fft.fft(rx)
        for tx in ref:
            corr = np.fft.ifft(rx_spec * np.conj(np.fft.fft(tx)))
            metric += np.abs(corr)
    return int(np.argmax(metric))


def _interior_blocks(fields: np.ndarray, taps: int) -> tuple[list, list]:
    """Indices of header blocks safe for block-circular estimation.

    Of the X-active half (blocks 0..3) and the Y-active half (4..7),
    the blocks bordering a content change (frame edge or the X/Y
    handover) are skipped.
    """
    n_blocks = fields.shape[1] // taps
    half = n_blocks // 2
    x_blocks = list(range(1, half - 1))
    y_blocks = list(range(half + 1, n_blocks - 1))
    return x_blocks, y_blocks


def fde_train(
    rx_training: np.ndarray,
    known_training: np.ndarray,
    taps: int = FDE_TAPS,
    active_threshold: float = 2e-4,
    singular_threshold: float = 1e-6,
) -> FdeCoefficients:
    """Zero-forcing estimate of the 2x2 frequency response.

    Both inputs are (2, n_samples) waveform slices covering the
    time-multiplexed training header.  Per bin, the reference content
    of both polarizations during the X-active and the Y-active block
    sets forms a 2x2 matrix T and the received content a matrix R with
    R = H T, so the equalizer is W = T R^{-1}; modeling the reference
    this way keeps the estimate exact even though the pulse tails of
    one half leak slightly into the other.  Bins where the training
    carries less than ``active_threshold`` of the peak amplitude
    (outside the pulse band) get a zero response; in-band bins with a
    singular received matrix are reported with their indices.
    """
    rx = np.atleast_2d(np.asarray(rx_training, dtype=complex))
    known = np.atleast_2d(np.asarray(known_training, dtype=complex))
    if rx.shape != known.shape:
        raise ConfigError("rx and known training shapes differ")
    if rx.shape[1] % taps:
        raise ConfigError("training length is not a multiple of the tap count")
    x_blocks, y_blocks = _interior_blocks(known, taps)
    if not x_blocks or not y_blocks:
        raise ConfigError("training too short for interior-block estimation")

    def block_fft(fields, blocks, pol):
        segs = [fields[pol, b * taps : (b + 1) * taps] for b in blocks]
        return np.mean(np.fft.fft(np.stack(segs), axis=-1), axis=0)

    t = np.empty((taps, 2, 2), dtype=complex)
    r = np.empty((taps, 2, 2), dtype=complex)
    for col, blocks in enumerate((x_blocks, y_blocks)):
        for row in range(2):
            t[:, row, col] = block_fft(known, blocks, row)
            r[:, row, col] = block_fft(rx, blocks, row)
    active = np.abs(t[:, 0, 0]) > active_threshold * np.max(np.abs(t[:, 0, 0]))

    det_r = r[:, 0, 0] * r[:, 1, 1] - r[:, 0, 1] * r[:, 1, 0]
    scale = np.max(np.abs(r.reshape(taps, 4)), axis=1) ** 2
    singular = active & (np.abs(det_r) < singular_threshold * np.maximum(scale, 1e-300))
    if np.any(singular):
        bins = np.nonzero(singular)[0].tolist()
        raise ConfigError(f"singular channel estimate at bin(s) {bins}")

    inv_det = np.where(active, 1.0 / np.where(active, det_r, 1.0), 0.0)
    r_inv = np.empty_like(r)
    r_inv[:, 0, 0] = r[:, 1, 1] * inv_det
    r_inv[:, 0, 1] = -r[:, 0, 1] * inv_det
    r_inv[:, 1, 0] = -r[:, 1, 0] * inv_det
    r_inv[:, 1, 1] = r[:, 0, 0] * inv_det
    w = np.einsum("kij,kjl->kil", t, r_inv)
    w[~active] = 0.0
    return FdeCoefficients(w, 0.0)


def fde_apply(signal: Signal, coeffs: FdeCoefficients) -> Signal:
    """Apply the 2x2 equalizer across the whole periodic block.

    The coarse response is interpolated (real and imaginary parts
    linearly) onto the block's FFT grid over its active support, held
    flat across the outermost active bin, and gated to zero half a
    coarse bin beyond the support.
    """
    if not signal.dual_pol:
        raise ConfigError("the equalizer expects a dual-polarization signal")
    n = signal.n_samples
    if n % coeffs.n_bins:
        raise ConfigError("coefficient grid incompatible with the block size")
    coarse_f = np.fft.fftshift(np.fft.fftfreq(coeffs.n_bins))
    fine_f = np.fft.fftshift(np.fft.fftfreq(n))
    resp = np.fft.fftshift(coeffs.response, axes=0)
    active = np.max(np.abs(resp.reshape(coeffs.n_bins, 4)), axis=1) > 0.0
    if not np.any(active):
        raise ConfigError("equalizer has no active bins")
    support = coarse_f[active]
    half_bin = 0.5 / coeffs.n_bins
    gate = (fine_f >= support.min() - half_bin) & (fine_f <= support.max() + half_bin)
    w_fine = np.zeros((n, 2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            entry = resp[active, i, j]
            w_fine[gate, i, j] = np.interp(fine_f[gate], support, entry.real) + 1j * np.interp(
                fine_f[gate], support, entry.imag
            )
    w_fine = np.fft.ifftshift(w_fine, axes=0)
    spec = np.fft.fft(signal.fields(), axis=-1)
    out = np.empty_like(spec)
    out[0] = w_fine[:, 0, 0] * spec[0] + w_fine[:, 0, 1] * spec[1]
    out[1] = w_fine[:, 1, 0] * spec[0] + w_fine[:, 1, 1] * spec[1]
    return signal.with_fields(np.fft.ifft(out, axis=-1))


def _fractional_shift(symbols: np.ndarray, shift: float) -> np.ndarray:
    """Circularly delay a symbol array by a (fractional) symbol count."""
    n = symbols.shape[-1]
    ramp = np.exp(-2j * np.pi * np.fft.fftfreq(n) * shift)
    return np.fft.ifft(np.fft.fft(symbols, axis=-1) * ramp, axis=-1)


def downsample_align(
    signal: Signal,
    tx_symbols: np.ndarray,
    symbol_rate: float,
    header_length: int = TRAINING_BLOCKS * TRAINING_BLOCK_LENGTH,
    peak_ratio: float = 1.5,
) -> SymbolFrame:
    """Symbol-rate decimation, alignment and normalization.

    Cross-correlation against the transmitted symbols resolves the
    integer shift (with a parabolic fit for any residual fractional
    offset); both streams are normalized to unit mean power over the
    payload and a data-aided common phase is removed per polarization.
    The training header is excluded from the returned frame.
    """
    tx = np.atleast_2d(np.asarray(tx_symbols, dtype=complex))
    sps = signal.sample_rate / symbol_rate
    if abs(sps - round(sps)) > 1e-9:
        raise ConfigError("signal is not at an integer number of samples per symbol")
    rx = signal.fields()[:, :: int(round(sps))]
    if rx.shape[1] != tx.shape[1]:
        raise ConfigError("decimated length does not match the transmitted frame")

    metric = np.zeros(tx.shape[1])
    for p in range(tx.shape[0]):
        corr = np.fft.ifft(np.fft.fft(rx[p]) * np.conj(np.fft.fft(tx[p])))
        metric += np.abs(corr)
    peak = int(np.argmax(metric))
    runner_up = float(np.max(np.delete(metric, [(peak - 1) % len(metric), peak, (peak + 1) % len(metric)])))
    if metric[peak] < peak_ratio * runner_up:
        raise AlignmentError("ambiguous correlation peak during frame alignment")
    # Parabolic interpolation around the peak for the fractional offset.
    y0, y1, y2 = metric[(peak - 1) % len(metric)], metric[peak], metric[(peak + 1) % len(metric)]
    denom = y0 - 2.0 * y1 + y2
    frac = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom
    rx = _fractional_shift(rx, -(peak + frac))

    payload_tx = tx[:, header_length:]
    payload_rx = rx[:, header_length:]
    out_tx = np.empty_like(payload_tx)
    out_rx = np.empty_like(payload_rx)
    for p in range(tx.shape[0]):
        t = payload_tx[p] / np.sqrt(np.mean(np.abs(payload_tx[p]) ** 2))
        r = payload_rx[p] / np.sqrt(np.mean(np.abs(payload_rx[p]) ** 2))
        phase = np.angle(np.sum(np.conj(t) * r))
        out_tx[p] = t
        out_rx[p] = r * np.exp(-1j * phase)
    return SymbolFrame(out_tx, out_rx, symbol_rate)


class CoefficientStore:
    """Directory of equalizer coefficient files keyed by (seed, spans)."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, seed: int, span_count: int) -> Path:
        return self.root / f"fde_seed{seed}_span{span_count:03d}.bin"

    def save(self, coeffs: FdeCoefficients) -> Path:
        path = self._path(coeffs.seed, coeffs.span_count)
        header = struct.pack(
            "<4sIqII d",
            _STORE_MAGIC,
            _STORE_VERSION,
            coeffs.seed,
            coeffs.span_count,
            coeffs.n_bins,
            coeffs.sample_rate,
        )
        records = bytearray()
        for k in range(coeffs.n_bins):
            w = coeffs.response[k]
            records += struct.pack(
                "<I8d",
                k,
                w[0, 0].real, w[0, 0].imag,
                w[0, 1].real, w[0, 1].imag,
                w[1, 0].real, w[1, 0].imag,
                w[1, 1].real, w[1, 1].imag,
            )
        path.write_bytes(header + bytes(records))
        return path

    def load(self, seed: int, span_count: int) -> FdeCoefficients:
        path = self._path(seed, span_count)
        if not path.exists():
            raise CalibrationMissing(
                f"no stored coefficients for seed={seed}, spans={span_count} in {self.root}"
            )
        blob = path.read_bytes()
        magic, version, f_seed, f_span, n_bins, rate = struct.unpack_from("<4sIqII d", blob)
        if magic != _STORE_MAGIC or version != _STORE_VERSION:
            raise CalibrationMissing(f"unrecognized coefficient file {path}")
        offset = struct.calcsize("<4sIqII d")
        response = np.empty((n_bins, 2, 2), dtype=complex)
        rec = struct.Struct("<I8d")
        for k in range(n_bins):
            vals = rec.unpack_from(blob, offset + k * rec.size)
            response[vals[0]] = np.array(
                [[vals[1] + 1j * vals[2], vals[3] + 1j * vals[4]],
                 [vals[5] + 1j * vals[6], vals[7] + 1j * vals[8]]]
            )
        return FdeCoefficients(response, rate, f_seed, f_span)


def receive_checkpoint(
    signal: Signal,
    plan: ChannelPlan,
    link: LinkConfig,
    coeffs: FdeCoefficients,
    tx_symbols: np.ndarray,
    step: StepControl = StepControl(),
) -> SymbolFrame:
    """Full receiver chain for one span checkpoint with loaded coefficients."""
    cut = extract_channel(
        signal, plan.cut.center_offset, plan.spacing,
        output_rate=DSP_SAMPLES_PER_SYMBOL * plan.symbol_rate,
    )
    cut = backpropagate(cut, link, step)
    cut = matched_filter(cut, plan.roll_off, plan.symbol_rate)
    cut = fde_apply(cut, coeffs)
    return downsample_align(cut, tx_symbols, plan.symbol_rate)


def calibrate_fde(
    link: LinkConfig,
    plan: ChannelPlan,
    realization_seed: int,
    n_symbols: int,
    samples_per_symbol: int,
    store: CoefficientStore,
    step: StepControl = StepControl(),
) -> list:
    """Linear-only single-channel calibration run; persists per-span FDEs.

    Propagates the CUT alone through the zero-Kerr link with the same
    PMD realization, conditioning and step grid the measurement run
    will use, trains the equalizer at every span count and stores the
    coefficients keyed by (realization seed, span count).
    """
    lin = link.linearized()
    tx_symbols, waveform = build_channel_waveform(
        plan.cut, plan, n_symbols, samples_per_symbol, realization_seed
    )
    reference = reference_header_waveform(plan)
    n_header = reference.shape[1]
    paths = []
    state = waveform
    for span in range(1, link.span_count + 1):
        pmd = PmdRealization(realization_seed, span)
        state = propagate_span(state, lin.fiber, step, pmd)
        state = amplify(state, lin.amplifier_gain_db)
        cut = extract_channel(
            state, plan.cut.center_offset, plan.spacing,
            output_rate=DSP_SAMPLES_PER_SYMBOL * plan.symbol_rate,
        )
        cut = backpropagate(cut, lin.truncated(span), step)
        cut = matched_filter(cut, plan.roll_off, plan.symbol_rate)
        offset = locate_header(cut, reference)
        idx = (offset + np.arange(n_header)) % cut.n_samples
        rx_header = cut.fields()[:, idx]
        trained = fde_train(rx_header, reference)
        # Carving at `offset` hides that advance inside the estimate; put
        # it back so the equalized frame lands on the transmit origin.
        f_bins = np.fft.fftfreq(trained.n_bins, d=1.0 / cut.sample_rate)
        ramp = np.exp(2j * np.pi * f_bins * offset / cut.sample_rate)
        response = trained.response * ramp[:, None, None]
        coeffs = FdeCoefficients(response, cut.sample_rate, realization_seed, span)
        paths.append(store.save(coeffs))
    return paths
