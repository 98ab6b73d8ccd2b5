"""Noise characterization on aligned symbol frames.

The received symbols are modeled as ``y_j = x_j exp(-i dtheta_j) + n_j``
with a slowly varying phase-noise process dtheta and an isotropic
("circular") residual n.  A centered circular moving average of the
rotated-scaled symbols estimates the phase term; projecting the window
average onto unit modulus removes only the phase estimate, which makes
the quadrature/inphase variance ratio of the residual a usable monitor:
it is negative while the window is too short and crosses zero once the
residual is isotropic.

Window lengths are odd (N + 1 samples for even N) and wrap circularly,
consistent with the periodic simulation blocks.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ZeroNoiseError
from .receiver import SymbolFrame

SMALL_ANGLE_LIMIT = 0.3  # rad; beyond this the small-angle power formula degrades
_TINY = 1e-300


@dataclass(frozen=True)
class PhaseTrace:
    """Per-symbol phase-noise estimate (rad) per polarization."""

    delta_theta: np.ndarray  # (n_pol, n)

    def __post_init__(self):
        dt = np.atleast_2d(np.asarray(self.delta_theta, dtype=float))
        object.__setattr__(self, "delta_theta", dt)

    @property
    def small_angle(self) -> bool:
        return bool(np.max(np.abs(self.delta_theta)) <= SMALL_ANGLE_LIMIT)


@dataclass(frozen=True)
class NoiseReport:
    """NLIN characterization at one measurement point.

    Powers are launch-referred watts: the normalized-frame variances
    are scaled by the channel power so they compare directly with the
    analytic-model band integrals.
    """

    p_nli: float
    p_phase: float
    p_circular: float
    cnr_percent: float
    n_opt: int
    distance: float
    scenario: str = ""
    realization: int = 0
    polarization: str = "mean"
    spread_pct: float = 0.0

    @classmethod
    def from_powers(cls, p_nli, p_phase, p_circular, n_opt, distance, **meta):
        cnr = 0.0 if p_nli <= 0 else float(np.clip(100.0 * p_circular / p_nli, 0.0, 100.0))
        return cls(p_nli, p_phase, p_circular, cnr, n_opt, distance, **meta)


@dataclass(frozen=True)
class SeparationResult:
    phase: PhaseTrace
    circular: np.ndarray  # (n_pol, n)
    n_opt: int
    exhausted: bool
    monitor: dict  # window -> per-polarization monitor values


def noise_power(frame: SymbolFrame) -> float:
    """Symbol-rate times the complex deviation variance, polarization mean."""
    if frame.n_symbols == 0:
        raise ConfigError("empty frame")
    variances = [np.var(frame.rx_symbols[p] - frame.tx_symbols[p]) for p in range(frame.n_pol)]
    return float(frame.symbol_rate * np.mean(variances))


def rotate_scale(frame: SymbolFrame, min_amplitude: float = 1e-9) -> np.ndarray:
    """Per-symbol x*.y/|x|^2: phase noise becomes a common rotation."""
    x = frame.tx_symbols
    if np.any(np.abs(x) < min_amplitude):
        raise ConfigError("transmitted symbol with near-zero amplitude")
    return np.conj(x) * frame.rx_symbols / np.abs(x) ** 2


def _circular_moving_average(values: np.ndarray, half: int) -> np.ndarray:
    """Centered moving average over 2*half+1 samples with circular wrap."""
    width = 2 * half + 1
    ext = np.concatenate([values[..., -half:], values, values[..., :half]], axis=-1)
    cs = np.cumsum(ext, axis=-1)
    zero = np.zeros(ext.shape[:-1] + (1,), dtype=ext.dtype)
    cs = np.concatenate([zero, cs], axis=-1)
    return (cs[..., width:] - cs[..., :-width]) / width


def _phase_factor(window_mean: np.ndarray) -> np.ndarray:
    """Unit-modulus projection of the window mean (phase-only removal)."""
    mag = np.abs(window_mean)
    return np.where(mag > _TINY, window_mean / np.where(mag > _TINY, mag, 1.0), 1.0)


def _residual(frame: SymbolFrame, window: int) -> tuple[np.ndarray, np.ndarray]:
    """(circular residual, window-average) for an even window parameter."""
    if window < 2 or window >= frame.n_symbols:
        raise ConfigError("window out of range")
    if window % 2:
        raise ConfigError("window parameter must be even (centered odd-length window)")
    rotated = rotate_scale(frame)
    avg = _circular_moving_average(rotated, window // 2)
    circ = frame.rx_symbols - frame.tx_symbols * _phase_factor(avg)
    return circ, avg


def monitor_signal(frame: SymbolFrame, window: int) -> np.ndarray:
    """Quadrature/inphase variance ratio minus one, per polarization."""
    circ, _ = _residual(frame, window)
    rotated_noise = np.conj(frame.tx_symbols) * circ / np.abs(frame.tx_symbols) ** 2
    sigma_i = np.var(rotated_noise.real, axis=-1)
    sigma_q = np.var(rotated_noise.imag, axis=-1)
    if np.any(sigma_i <= _TINY):
        raise ZeroNoiseError("frame carries no measurable noise")
    return sigma_q / sigma_i - 1.0


def separate_phase_circular(
    frame: SymbolFrame,
    epsilon: float = 0.0,
    n_max: Optional[int] = None,
) -> SeparationResult:
    """Split the deviation into phase noise and circular noise.

    Walks even window parameters upward from 2 while any polarization's
    monitor stays at or below ``-epsilon``; the chosen window minimizes
    the summed absolute monitor over the visited values.  If no sign
    change occurs up to ``n_max`` (default: an eighth of the frame) the
    largest window is used and the result is flagged as exhausted.
    """
    if n_max is None:
        n_max = frame.n_symbols // 8
    n_max = max(2, n_max - n_max % 2)
    if frame.n_symbols < 4 * n_max:
        raise ConfigError("frame too short for the separation search")
    monitor = {}
    exhausted = True
    for window in range(2, n_max + 1, 2):
        monitor[window] = monitor_signal(frame, window)
        if np.all(monitor[window] > -epsilon):
            exhausted = False
            break
    if exhausted:
        n_opt = n_max
    else:
        n_opt = min(monitor, key=lambda w: abs(float(np.sum(monitor[w]))))
    circ, avg = _residual(frame, n_opt)
    trace = PhaseTrace(-np.angle(_phase_factor(avg)))
    return SeparationResult(trace, circ, n_opt, exhausted, monitor)


def phase_noise_power(trace: PhaseTrace, frame: SymbolFrame) -> float:
    """Small-angle phase-noise power S_R var[dtheta] E[|x|^2], pol mean."""
    powers = [
        np.var(trace.delta_theta[p]) * np.mean(np.abs(frame.tx_symbols[p]) ** 2)
        for p in range(trace.delta_theta.shape[0])
    ]
    return float(frame.symbol_rate * np.mean(powers))


def circular_noise_power(circular: np.ndarray, symbol_rate: float) -> float:
    """S_R times the circular-residual variance, polarization mean."""
    circ = np.atleast_2d(circular)
    return float(symbol_rate * np.mean([np.var(circ[p]) for p in range(circ.shape[0])]))


def phase_acf(trace: PhaseTrace, max_lag: int) -> np.ndarray:
    """Circular autocorrelation of the phase trace, unity at lag zero.

    Summed over polarizations before normalizing; symmetric by
    construction, so only lags 0..max_lag are returned.
    """
    n = trace.delta_theta.shape[1]
    if max_lag >= n // 4:
        raise ConfigError("max_lag must stay below a quarter of the trace")
    spec = np.fft.fft(trace.delta_theta, axis=-1)
    acf = np.fft.ifft(np.abs(spec) ** 2, axis=-1).real.sum(axis=0)
    if acf[0] <= 0:
        raise ZeroNoiseError("phase trace has zero energy")
    return acf[: max_lag + 1] / acf[0]


def measure_frame(
    frame: SymbolFrame,
    distance: float,
    reference_power: float,
    epsilon: float = 0.0,
    n_max: Optional[int] = None,
    **meta,
) -> NoiseReport:
    """Full NLIN characterization of one frame.

    ``reference_power`` converts the normalized-frame variances to
    launch-referred watts (P = P_ch * var instead of S_R * var).
    """
    scale = reference_power / frame.symbol_rate
    p_nli = noise_power(frame) * scale
    sep = separate_phase_circular(frame, epsilon=epsilon, n_max=n_max)
    p_phase = phase_noise_power(sep.phase, frame) * scale
    p_circ = circular_noise_power(sep.circular, frame.symbol_rate) * scale
    return NoiseReport.from_powers(p_nli, p_phase, p_circ, sep.n_opt, distance, **meta)


def average_reports(reports: Sequence[NoiseReport]) -> NoiseReport:
    """Arithmetic mean over realizations; CNR recomputed from the means."""
    if not reports:
        raise ConfigError("no reports to average")
    first = reports[0]
    for r in reports[1:]:
        if r.scenario != first.scenario or r.distance != first.distance:
            raise ConfigError("cannot average reports from different measurement points")
    p_nli = float(np.mean([r.p_nli for r in reports]))
    p_phase = float(np.mean([r.p_phase for r in reports]))
    p_circ = float(np.mean([r.p_circular for r in reports]))
    n_opt = int(round(np.mean([r.n_opt for r in reports])))
    spread = 0.0
    if p_nli > 0:
        spread = float(np.mean([abs(r.p_nli - p_nli) for r in reports]) / p_nli * 100.0)
    return NoiseReport.from_powers(
        p_nli, p_phase, p_circ, n_opt, first.distance,
        scenario=first.scenario, realization=-1, polarization="mean",
        spread_pct=spread,
    )
