"""Wavelength-selective add/drop between spans.

Filters are perfectly rectangular (brick-wall on the FFT grid): the
channel under test passes through unchanged inside its slot, dropped
interferer slots are emptied, and freshly conditioned interferer copies
are added at the power the slot carried before the exchange.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import seeds
from .errors import ConfigError
from .signals import Signal
from .transmitter import ChannelPlan, ChannelSpec, condition_channel, frequency_shift


@dataclass(frozen=True)
class RoadmConfig:
    """Add/drop behaviour at the end of every span.

    ``replacement_seed`` is the base entropy for re-conditioning added
    copies; the per-(span, channel) seeds derive from it
    deterministically.  ``recondition`` exists for degenerate checks
    where added copies must keep their delay and orientation.
    """

    active: bool = False
    passband_width: float = 0.0  # Hz, equals the channel spacing
    filter_shape: str = "rectangular"
    replacement_seed: int = 0
    recondition: bool = True

    def __post_init__(self):
        if self.active and self.passband_width <= 0:
            raise ConfigError("active ROADM needs a positive passband width")
        if self.filter_shape != "rectangular":
            raise ConfigError("only rectangular filters are implemented")

    def seed_for(self, span_index: int, channel_index: int) -> int:
        return seeds.derive_seed(
            self.replacement_seed, seeds.ROADM, span_index, channel_index + 1000
        )


def _band_mask(freqs: np.ndarray, center: float, width: float) -> np.ndarray:
    return np.abs(freqs - center) <= width / 2.0


def wss_filter(signal: Signal, passbands: Sequence[tuple[float, float]]) -> Signal:
    """Keep only the union of rectangular passbands (center, width)."""
    bands = sorted(passbands)
    for (c0, w0), (c1, w1) in zip(bands, bands[1:]):
        if c0 + w0 / 2.0 > c1 - w1 / 2.0:
            raise ConfigError("overlapping WSS passbands")
    freqs = signal.frequencies()
    mask = np.zeros(signal.n_samples, dtype=bool)
    for center, width in bands:
        mask |= _band_mask(freqs, center, width)
    spec = np.fft.fft(signal.fields(), axis=-1)
    spec[:, ~mask] = 0.0
    return signal.with_fields(np.fft.ifft(spec, axis=-1))


def _slot_power(signal: Signal, center: float, width: float) -> float:
    freqs = signal.frequencies()
    spec = np.fft.fft(signal.fields(), axis=-1)
    mask = _band_mask(freqs, center, width)
    return float(np.sum(np.abs(spec[:, mask]) ** 2) / signal.n_samples**2)


def replace_interferers(
    wdm: Signal,
    plan: ChannelPlan,
    fresh: Sequence[tuple[ChannelSpec, Signal]],
    span_index: int,
    config: RoadmConfig,
) -> Signal:
    """Drop every interferer slot and add a re-conditioned fresh copy.

    Fresh copies are the original baseband channel waveforms (already
    carrying any imposed pre-dispersion); each is given a new random
    delay and polarization rotation seeded per (span, channel), then
    scaled so the slot power matches what the through-path carried.
    The CUT slot is the filtered through-path of the input.
    """
    if not config.active:
        return wdm
    fresh_by_index = {spec.index: (spec, sig) for spec, sig in fresh}
    missing = [ch.index for ch in plan.interferers if ch.index not in fresh_by_index]
    if missing:
        raise ConfigError(f"missing fresh copies for interferer(s) {missing}")

    width = config.passband_width
    out = wss_filter(wdm, [(plan.cut.center_offset, width)])
    total = out.fields().copy()
    for ch in plan.interferers:
        spec, sig = fresh_by_index[ch.index]
        copy = sig
        if config.recondition:
            seed = config.seed_for(span_index, ch.index)
            copy = condition_channel(sig, seed, 1.0 / plan.symbol_rate)
        shifted, _ = frequency_shift(copy, ch.center_offset)
        added = wss_filter(shifted, [(ch.center_offset, width)])
        target = _slot_power(wdm, ch.center_offset, width)
        current = added.power()
        if current > 0.0 and target > 0.0:
            added = added.scaled(np.sqrt(target / current))
        total[: added.fields().shape[0]] += added.fields()
    return wdm.with_fields(total)
