"""Per-channel waveform generation and WDM multiplexing.

The transmit chain is: random bits -> symbol mapping -> CAZAC training
header insertion -> root-raised-cosine pulse shaping on the periodic
block -> optional pre-dispersion -> random delay/rotation conditioning
-> frequency shift and summation into the WDM composite.

Gray mappings are fixed here so bit-level results are reproducible:

* QPSK: bits (b0, b1) -> ((1 - 2 b0) + i (1 - 2 b1)) / sqrt(2),
  i.e. 00 maps to (1 + i)/sqrt(2).
* 16QAM: bits (b0, b1, b2, b3); (b0, b1) select the I level and
  (b2, b3) the Q level through the per-axis Gray code
  00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3, then scaled by 1/sqrt(10).
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import seeds, units
from .errors import ConfigError
from .signals import Signal, apply_transfer, quadratic_phase_transfer

_QPSK_LEVELS = np.array([1.0, -1.0])  # indexed by one bit
_QAM16_LEVELS = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}

TRAINING_BLOCKS = 8
TRAINING_BLOCK_LENGTH = 64
DEFAULT_CAZAC_ROOT = 1


@dataclass(frozen=True)
class ModulationFormat:
    """Symbol alphabet with unit average power (or complex normal)."""

    name: str
    alphabet: Optional[np.ndarray]  # None for the Gaussian format

    def __post_init__(self):
        if self.alphabet is not None:
            a = np.asarray(self.alphabet, dtype=complex)
            object.__setattr__(self, "alphabet", a)

    @property
    def bits_per_symbol(self) -> int:
        if self.alphabet is None:
            raise ConfigError("gaussian format carries no bit mapping")
        return int(np.log2(self.alphabet.size))


QPSK = ModulationFormat(
    "QPSK",
    np.array([(1 - 2 * (i >> 1)) + 1j * (1 - 2 * (i & 1)) for i in range(4)]) / np.sqrt(2),
)
QAM16 = ModulationFormat(
    "16QAM",
    np.array(
        [
            _QAM16_LEVELS[i >> 2] + 1j * _QAM16_LEVELS[i & 0b11]
            for i in range(16)
        ]
    )
    / np.sqrt(10),
)
GAUSSIAN = ModulationFormat("GAUSSIAN", None)

_FORMATS = {"QPSK": QPSK, "16QAM": QAM16, "GAUSSIAN": GAUSSIAN}


def modulation_format(name: str) -> ModulationFormat:
    try:
        return _FORMATS[name.upper()]
    except KeyError:
        raise ConfigError(f"unknown modulation format {name!r}") from None


@dataclass(frozen=True)
class ChannelSpec:
    """One WDM channel; index 0 designates the channel under test."""

    index: int
    center_offset: float  # Hz from the CUT
    format: ModulationFormat
    launch_power: float  # W, total over both polarizations
    pre_dispersion: float = 0.0  # accumulated D*L in s/m
    seed: int = 0

    def __post_init__(self):
        if self.launch_power <= 0:
            raise ConfigError("launch_power must be positive")

    @property
    def is_cut(self) -> bool:
        return self.index == 0


@dataclass(frozen=True)
class ChannelPlan:
    channels: tuple
    spacing: float
    symbol_rate: float
    roll_off: float

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not 0.0 <= self.roll_off <= 1.0:
            raise ConfigError("roll_off must lie in [0, 1]")
        if self.spacing < (1.0 + self.roll_off) * self.symbol_rate:
            raise ConfigError("channel spacing below (1 + roll_off) * symbol_rate")
        if sum(1 for ch in self.channels if ch.is_cut) != 1:
            raise ConfigError("plan must contain exactly one CUT (index 0)")

    @property
    def cut(self) -> ChannelSpec:
        return next(ch for ch in self.channels if ch.is_cut)

    @property
    def interferers(self) -> tuple:
        return tuple(ch for ch in self.channels if not ch.is_cut)

    @property
    def occupied_band(self) -> float:
        """Full width of the occupied WDM spectrum in Hz."""
        edge = max(abs(ch.center_offset) for ch in self.channels)
        return 2.0 * edge + (1.0 + self.roll_off) * self.symbol_rate


def build_plan(
    n_channels: int,
    spacing: float,
    symbol_rate: float,
    roll_off: float,
    cut_format: ModulationFormat,
    int_format: ModulationFormat,
    launch_power: float,
    int_pre_dispersion: float = 0.0,
) -> ChannelPlan:
    """Symmetric plan with the CUT at the center of an odd channel count."""
    if n_channels % 2 == 0:
        raise ConfigError("plans are symmetric around the CUT; use an odd channel count")
    half = n_channels // 2
    chans = []
    for idx in range(-half, half + 1):
        chans.append(
            ChannelSpec(
                index=idx,
                center_offset=idx * spacing,
                format=cut_format if idx == 0 else int_format,
                launch_power=launch_power,
                pre_dispersion=0.0 if idx == 0 else int_pre_dispersion,
            )
        )
    return ChannelPlan(tuple(chans), spacing, symbol_rate, roll_off)


def random_bits(count: int, seed: int) -> np.ndarray:
    """Seeded uniform bit stream (uint8 array of 0/1)."""
    return seeds.rng_for(seed).integers(0, 2, size=count, dtype=np.uint8)


def map_symbols(bits: np.ndarray, fmt: ModulationFormat, seed: int = 0) -> np.ndarray:
    """Map a bit stream onto constellation symbols (unit average power).

    The Gaussian format ignores the bit content and draws
    complex-normal symbols from the seed; ``len(bits)`` then sets the
    symbol count directly.
    """
    if fmt.alphabet is None:
        n = len(bits)
        rng = seeds.rng_for(seed, seeds.GAUSS_SYMBOLS)
        return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    bps = fmt.bits_per_symbol
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % bps:
        raise ConfigError(f"bit count {bits.size} not divisible by {bps}")
    groups = bits.reshape(-1, bps)
    idx = np.zeros(groups.shape[0], dtype=np.int64)
    for b in range(bps):
        idx = (idx << 1) | groups[:, b]
    return fmt.alphabet[idx]


def cazac_sequence(length: int, root: int = DEFAULT_CAZAC_ROOT) -> np.ndarray:
    """Zadoff-Chu sequence: unit modulus, zero circular autocorrelation."""
    if length < 2:
        raise ConfigError("CAZAC length must be >= 2")
    if np.gcd(root, length) != 1:
        raise ConfigError(f"root {root} not coprime with length {length}")
    k = np.arange(length)
    if length % 2 == 0:
        phase = np.pi * root * k**2 / length
    else:
        phase = np.pi * root * k * (k + 1) / length
    return np.exp(-1j * phase)


def training_header(
    n_blocks: int = TRAINING_BLOCKS,
    block_length: int = TRAINING_BLOCK_LENGTH,
    root: int = DEFAULT_CAZAC_ROOT,
) -> np.ndarray:
    """Dual-polarization training header of shape (2, n_blocks*block_length).

    The header is time-multiplexed between polarizations: the first
    half of the blocks carries the CAZAC sequence on X (Y silent), the
    second half on Y (X silent), so the receiver can estimate all four
    entries of the 2x2 channel response.
    """
    zc = cazac_sequence(block_length, root)
    header = np.zeros((2, n_blocks * block_length), dtype=complex)
    half = n_blocks // 2
    for b in range(half):
        header[0, b * block_length : (b + 1) * block_length] = zc
    for b in range(half, n_blocks):
        header[1, b * block_length : (b + 1) * block_length] = zc
    return header


def frame_symbols(fmt: ModulationFormat, n_symbols: int, seed: int) -> np.ndarray:
    """Full dual-pol symbol frame: training header followed by payload.

    ``n_symbols`` is the total frame length including the header.
    Payload bits are drawn independently per polarization.
    """
    header = training_header()
    n_payload = n_symbols - header.shape[1]
    if n_payload <= 0:
        raise ConfigError("frame shorter than the training header")
    frame = np.empty((2, n_symbols), dtype=complex)
    frame[:, : header.shape[1]] = header
    for pol in range(2):
        pol_seed = seeds.derive_seed(seed, seeds.BITS, pol)
        if fmt.alphabet is None:
            payload = map_symbols(np.empty(n_payload), fmt, pol_seed)
        else:
            bits = random_bits(n_payload * fmt.bits_per_symbol, pol_seed)
            payload = map_symbols(bits, fmt, pol_seed)
        frame[pol, header.shape[1] :] = payload
    return frame


def raised_cosine_spectrum(f: np.ndarray, symbol_rate: float, roll_off: float) -> np.ndarray:
    """Unit-peak raised-cosine power spectrum (integrates to symbol_rate).

    The zero-roll-off limit takes the value 1/2 exactly at the Nyquist
    edge so the folded spectrum still sums to one there.
    """
    f = np.abs(np.asarray(f, dtype=float))
    if roll_off == 0.0:
        half = symbol_rate / 2.0
        out = (f < half).astype(float)
        out[np.isclose(f, half, rtol=1e-12, atol=0.0)] = 0.5
        return out
    flat_edge = (1.0 - roll_off) * symbol_rate / 2.0
    stop_edge = (1.0 + roll_off) * symbol_rate / 2.0
    out = np.zeros_like(f)
    out[f <= flat_edge] = 1.0
    taper = (f > flat_edge) & (f < stop_edge)
    out[taper] = np.cos(np.pi / (2.0 * symbol_rate * roll_off) * (f[taper] - flat_edge)) ** 2
    return out


def shape_pulses(
    symbols: np.ndarray,
    roll_off: float,
    samples_per_symbol: int,
    symbol_rate: float,
) -> Signal:
    """Root-raised-cosine pulse shaping on the periodic block.

    The RRC filter is applied in the frequency domain (no FIR
    truncation), emulating ideal DAC filtering.  With unit-power
    symbols the waveform has unit mean power per polarization, and the
    receiver matched filter plus symbol-instant decimation reproduces
    the symbols exactly on the periodic grid.
    """
    if samples_per_symbol < 2:
        raise ConfigError("need at least 2 samples per symbol")
    symbols = np.atleast_2d(np.asarray(symbols, dtype=complex))
    n_sym = symbols.shape[1]
    n = n_sym * samples_per_symbol
    rate = symbol_rate * samples_per_symbol
    up = np.zeros((symbols.shape[0], n), dtype=complex)
    up[:, ::samples_per_symbol] = symbols
    f = np.fft.fftfreq(n, d=1.0 / rate)
    h = samples_per_symbol * np.sqrt(raised_cosine_spectrum(f, symbol_rate, roll_off))
    fields = np.fft.ifft(np.fft.fft(up, axis=-1) * h, axis=-1)
    if symbols.shape[0] == 1:
        return Signal(fields[0], rate)
    return Signal(fields[0], rate, 0.0, fields[1])


def matched_filter(signal: Signal, roll_off: float, symbol_rate: float) -> Signal:
    """Receiver-side RRC filter matched to :func:`shape_pulses`."""
    f = signal.frequencies()
    h = np.sqrt(raised_cosine_spectrum(f, symbol_rate, roll_off))
    fields = np.fft.ifft(np.fft.fft(signal.fields(), axis=-1) * h, axis=-1)
    return signal.with_fields(fields)


def apply_pre_dispersion(signal: Signal, acc_dispersion: float,
                         wavelength: float = units.REFERENCE_WAVELENGTH) -> Signal:
    """Impose accumulated chromatic dispersion (D*L, s/m) on a channel.

    Positive accumulated dispersion produces the same quadratic
    spectral phase as forward propagation through fiber with that D*L
    product; the magnitude spectrum is untouched.
    """
    if acc_dispersion == 0.0:
        return signal
    beta2_length = units.beta2_from_dispersion(acc_dispersion, wavelength)
    return apply_transfer(signal, quadratic_phase_transfer(beta2_length))


def haar_unitary(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    """Haar-distributed random unitary (QR of a complex Ginibre matrix)."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def condition_channel(signal: Signal, seed: int, max_delay: float) -> Signal:
    """Seed-deterministic sub-symbol delay and polarization rotation.

    Mirrors the hardware reality that every transmitter feeds the
    multiplexer through its own path; both operations are unitary, so
    power is preserved exactly.
    """
    rng = seeds.rng_for(seed, seeds.CONDITION)
    delay = rng.uniform(0.0, max_delay)
    fields = np.fft.fft(signal.fields(), axis=-1)
    fields = fields * np.exp(-2j * np.pi * signal.frequencies() * delay)
    if fields.shape[0] == 2:
        fields = haar_unitary(rng) @ fields
    else:
        fields = fields * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    return signal.with_fields(np.fft.ifft(fields, axis=-1))


def frequency_shift(signal: Signal, offset: float) -> tuple[Signal, float]:
    """Shift a channel to ``offset`` Hz, snapped onto the FFT bin grid.

    Returns the shifted signal and the snapped offset actually applied
    (deviation at most half a bin, a few MHz at production block sizes).
    """
    df = signal.sample_rate / signal.n_samples
    shift_bins = int(round(offset / df))
    spec = np.fft.fft(signal.fields(), axis=-1)
    spec = np.roll(spec, shift_bins, axis=-1)
    return signal.with_fields(np.fft.ifft(spec, axis=-1)), shift_bins * df


def multiplex(
    channels: Sequence[tuple[ChannelSpec, Signal]],
    plan: Optional[ChannelPlan] = None,
) -> Signal:
    """Sum frequency-shifted per-channel signals into the WDM composite."""
    if not channels:
        raise ConfigError("no channels to multiplex")
    rate = channels[0][1].sample_rate
    n = channels[0][1].n_samples
    for _, sig in channels:
        if sig.sample_rate != rate or sig.n_samples != n:
            raise ConfigError("all channel signals must share one sampling grid")
    if plan is not None:
        edge = max(abs(ch.center_offset) for ch, _ in channels)
        if edge + (1.0 + plan.roll_off) * plan.symbol_rate / 2.0 > rate / 2.0:
            raise ConfigError("composite bandwidth exceeds the sample rate")
    total = np.zeros((2, n), dtype=complex)
    dual = False
    for spec, sig in channels:
        shifted, _ = frequency_shift(sig, spec.center_offset)
        f = shifted.fields()
        total[: f.shape[0]] += f
        dual = dual or shifted.dual_pol
    if dual:
        return Signal(total[0], rate, 0.0, total[1])
    return Signal(total[0], rate)


def build_channel_waveform(
    spec: ChannelSpec,
    plan: ChannelPlan,
    n_symbols: int,
    samples_per_symbol: int,
    realization_seed: int,
) -> tuple[np.ndarray, Signal]:
    """Generate one channel at baseband, scaled to its launch power.

    Returns (symbol frame, conditioned waveform).  Pre-dispersion is
    applied about the channel's own center before conditioning, so it
    commutes with the later frequency shift.
    """
    ch_seed = seeds.derive_seed(realization_seed, spec.index + 1000)
    symbols = frame_symbols(spec.format, n_symbols, ch_seed)
    sig = shape_pulses(symbols, plan.roll_off, samples_per_symbol, plan.symbol_rate)
    sig = sig.scaled(np.sqrt(spec.launch_power / sig.power()))
    sig = apply_pre_dispersion(sig, spec.pre_dispersion)
    sig = condition_channel(sig, ch_seed, 1.0 / plan.symbol_rate)
    return symbols, sig
