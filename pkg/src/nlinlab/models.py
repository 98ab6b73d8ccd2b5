"""Semi-analytical interference-PSD models via 2-D numerical quadrature.

The phase-blind model integrates the triple product of the WDM power
spectral density against the four-wave-mixing kernel

    PSD_NLI(f) = 16/27 * I[ S(f1) S(f2) S(f1+f2-f) |zeta nu|^2 ]

where zeta captures the per-span mixing efficiency and nu the coherent
accumulation over identical spans (a Dirichlet kernel).  Being built
from |.|^2 quantities only, it is invariant to channel phase: neither
pre-dispersion nor modulation format changes its output.

Modulation-aware corrections keep the channel phase inside a coherent
inner integral.  The correction-term catalogue (coefficients, channel
roles and moment orders) lives in ``egn_terms.yaml`` next to this
module; only the corrected totals depend on it.
"""

from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

import numpy as np
import yaml

from .errors import ConfigError, NumericalError
from .link import LinkConfig
from .transmitter import ChannelPlan, ChannelSpec, ModulationFormat, raised_cosine_spectrum

DEFAULT_GRID_FRACTION = 64  # quadrature spacing = symbol_rate / this
_SIN_GUARD = 1e-8


@dataclass(frozen=True)
class ModulationMoments:
    second: float
    fourth: float
    sixth: float

    @property
    def phi_b(self) -> float:
        """Fourth-order excess E|b|^4/E|b|^2^2 - 2 (0 for complex normal)."""
        return self.fourth / self.second**2 - 2.0

    @property
    def psi_b(self) -> float:
        """Sixth-order excess, also vanishing for complex-normal symbols."""
        return self.sixth / self.second**3 - 9.0 * self.fourth / self.second**2 + 12.0


def modulation_moments(fmt: ModulationFormat) -> ModulationMoments:
    """Exact alphabet moments (enumeration) or the complex-normal values."""
    if fmt.alphabet is None:
        return ModulationMoments(1.0, 2.0, 6.0)
    mag2 = np.abs(fmt.alphabet) ** 2
    return ModulationMoments(
        float(np.mean(mag2)), float(np.mean(mag2**2)), float(np.mean(mag2**3))
    )


@dataclass(frozen=True)
class NliPsd:
    """Interference PSD on a frequency grid with a labeled decomposition.

    Components: ``total``, ``sci``, ``xci``, ``mci`` (phase-blind parts)
    and ``correction`` (sum of modulation-aware terms, may be negative).
    ``total`` includes the correction.
    """

    frequencies: np.ndarray
    components: dict

    @property
    def total(self) -> np.ndarray:
        return self.components["total"]


def fwm_efficiency(f1, f2, f, fiber, span_length: float) -> np.ndarray:
    """Per-span four-wave-mixing efficiency (complex).

    Phase-matched arguments reduce to gamma * L_eff; the lossless
    phase-matched limit is gamma * span_length (handled by series).
    """
    theta = 4.0 * np.pi**2 * fiber.beta2 * (np.asarray(f1) - f) * (np.asarray(f2) - f)
    d = 2.0 * fiber.attenuation - 1j * theta
    dl = d * span_length
    small = np.abs(dl) < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        full = (1.0 - np.exp(-dl)) / d
    series = span_length * (1.0 - dl / 2.0 + dl**2 / 6.0)
    return fiber.gamma * np.where(small, series, full)


def coherence_factor(f1, f2, f, beta2: float, span_length: float, span_count: int) -> np.ndarray:
    """Coherent accumulation over identical spans (Dirichlet kernel).

    Evaluates sin(N x)/sin(x) * exp(i x (N-1)) with
    x = 2 pi^2 beta2 (f1-f)(f2-f) L_s, switching to the analytic limit
    N cos(N x)/cos(x) where sin(x) vanishes.
    """
    if span_count < 1:
        raise ConfigError("span_count must be >= 1")
    x = 2.0 * np.pi**2 * beta2 * (np.asarray(f1) - f) * (np.asarray(f2) - f) * span_length
    sin_x = np.sin(x)
    small = np.abs(sin_x) < _SIN_GUARD
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(small, 1.0, np.sin(span_count * x) / np.where(small, 1.0, sin_x))
    limit = span_count * np.cos(span_count * x) / np.cos(x)
    ratio = np.where(small, limit, ratio)
    return ratio * np.exp(1j * x * (span_count - 1))


def wdm_psd(plan: ChannelPlan, f: np.ndarray) -> np.ndarray:
    """Total WDM power spectral density in W/Hz on the given frequencies."""
    psd = np.zeros_like(np.asarray(f, dtype=float))
    for ch in plan.channels:
        psd += ch.launch_power / plan.symbol_rate * raised_cosine_spectrum(
            np.asarray(f) - ch.center_offset, plan.symbol_rate, plan.roll_off
        )
    return psd


def _channel_ownership(plan: ChannelPlan, f: np.ndarray) -> np.ndarray:
    """Channel index owning each frequency (plan index, or -999 for guard)."""
    own = np.full(f.shape, -999, dtype=int)
    half_width = (1.0 + plan.roll_off) * plan.symbol_rate / 2.0
    for ch in plan.channels:
        mask = np.abs(f - ch.center_offset) <= half_width
        own[mask] = ch.index
    return own


def quadrature_grid(plan: ChannelPlan, spacing: Optional[float] = None) -> np.ndarray:
    """Uniform grid covering the occupied WDM band plus one channel pad."""
    h = plan.symbol_rate / DEFAULT_GRID_FRACTION if spacing is None else spacing
    half = plan.occupied_band / 2.0 + plan.symbol_rate
    n = int(np.ceil(half / h))
    return np.arange(-n, n + 1) * h


def _snap_index(grid: np.ndarray, f: float) -> int:
    idx = int(round((f - grid[0]) / (grid[1] - grid[0])))
    if not 0 <= idx < grid.size:
        raise ConfigError("target frequency outside the quadrature grid")
    return idx


def gn_nli_psd(
    plan: ChannelPlan,
    link: LinkConfig,
    f_grid: np.ndarray,
    spacing: Optional[float] = None,
) -> NliPsd:
    """Phase-blind interference PSD with per-kind decomposition.

    Target frequencies are snapped onto the internal quadrature grid.
    Deterministic for a fixed grid; the companion ``refine`` check in
    the tests guards against under-resolved quadrature.
    """
    grid = quadrature_grid(plan, spacing)
    h = grid[1] - grid[0]
    s = wdm_psd(plan, grid)
    own = _channel_ownership(plan, grid)
    n = grid.size
    fiber = link.fiber

    idx = np.arange(n)
    i_sum = idx[:, None] + idx[None, :]
    out = {k: np.zeros(len(f_grid)) for k in ("total", "sci", "xci", "mci")}
    for j, f in enumerate(np.asarray(f_grid, dtype=float)):
        i_f = _snap_index(grid, f)
        ft = grid[i_f]
        i3 = i_sum - i_f
        valid = (i3 >= 0) & (i3 < n)
        i3c = np.clip(i3, 0, n - 1)
        s3 = np.where(valid, s[i3c], 0.0)
        zeta = fwm_efficiency(grid[:, None], grid[None, :], ft, fiber, link.span_length)
        nu = coherence_factor(
            grid[:, None], grid[None, :], ft, fiber.beta2, link.span_length, link.span_count
        )
        kernel = np.abs(zeta) ** 2 * np.abs(nu) ** 2
        integrand = s[:, None] * s[None, :] * s3 * kernel
        total = 16.0 / 27.0 * np.sum(integrand) * h * h
        c1 = own[:, None]
        c2 = own[None, :]
        c3 = np.where(valid, own[i3c], -998)
        sci = (c1 == 0) & (c2 == 0) & (c3 == 0)
        has_cut = (c1 == 0) | (c2 == 0) | (c3 == 0)
        two_distinct = (
            ((c1 == c2) & (c2 != c3)) | ((c1 == c3) & (c1 != c2)) | ((c2 == c3) & (c1 != c2))
        )
        xci = has_cut & two_distinct & ~sci
        factor = 16.0 / 27.0 * h * h
        out["total"][j] = total
        out["sci"][j] = factor * np.sum(integrand[sci])
        out["xci"][j] = factor * np.sum(integrand[xci])
        out["mci"][j] = total - out["sci"][j] - out["xci"][j]
    out["correction"] = np.zeros(len(f_grid))
    return NliPsd(np.asarray(f_grid, dtype=float), out)


def xmci_power(full: NliPsd, cut_only: NliPsd, cut_band: tuple[float, float]) -> float:
    """Cross/multi-channel power: band integral of (full - single-channel)."""
    if full.frequencies.shape != cut_only.frequencies.shape or np.any(
        full.frequencies != cut_only.frequencies
    ):
        raise ConfigError("PSD grids do not match")
    f = full.frequencies
    lo, hi = cut_band
    mask = (f >= lo) & (f <= hi)
    if np.count_nonzero(mask) < 2:
        raise ConfigError("cut band resolves fewer than two grid points")
    diff = full.total[mask] - cut_only.total[mask]
    return max(float(np.trapezoid(diff, f[mask])), 0.0)


# --- modulation-aware correction terms -------------------------------------

_TERM_CACHE = None


def correction_terms() -> list:
    """Load the correction-term catalogue bundled with the package."""
    global _TERM_CACHE
    if _TERM_CACHE is None:
        text = resources.files(__package__).joinpath("egn_terms.yaml").read_text()
        data = yaml.safe_load(text)
        if data.get("version") != 1:
            raise ConfigError("unsupported correction-term catalogue version")
        _TERM_CACHE = data["terms"]
    return _TERM_CACHE


def _rect_field_band(ch: ChannelSpec, symbol_rate: float) -> tuple[float, float]:
    return (ch.center_offset - symbol_rate / 2.0, ch.center_offset + symbol_rate / 2.0)


def _correction_term_psd(
    outer: ChannelSpec,
    doubled: ChannelSpec,
    plan: ChannelPlan,
    link: LinkConfig,
    f_grid: np.ndarray,
    coefficient: float,
    moment: float,
    spacing: Optional[float] = None,
) -> np.ndarray:
    """One nested-quadrature correction term on rectangular spectra.

    The doubled channel contributes the coherent inner integral
    I(f1, f) = sum_f2 G(f2) G*(f1+f2-f) mu(f1, f2, f) h; the outer
    channel weighs |I|^2 with its power spectrum.  Rectangular field
    spectra of width S_R are normalized to integral(|G|^2) = 1/S_R.
    """
    sr = plan.symbol_rate
    h = sr / DEFAULT_GRID_FRACTION if spacing is None else spacing
    fiber = link.fiber

    o_lo, o_hi = _rect_field_band(outer, sr)
    d_lo, d_hi = _rect_field_band(doubled, sr)
    f1 = np.arange(o_lo + h / 2.0, o_hi, h)
    f2 = np.arange(d_lo + h / 2.0, d_hi, h)
    g_sq_outer = 1.0 / sr**2  # |G_outer|^2 on its band
    g_d = 1.0 / sr  # field value of the doubled channel on its band

    prefactor = (
        coefficient
        * moment
        * sr**2
        * outer.launch_power
        * doubled.launch_power**2
    )
    out = np.empty(len(f_grid))
    for j, f in enumerate(np.asarray(f_grid, dtype=float)):
        f3 = f1[:, None] + f2[None, :] - f
        inside = (f3 >= d_lo) & (f3 <= d_hi)
        zeta = fwm_efficiency(f1[:, None], f2[None, :], f, fiber, link.span_length)
        nu = coherence_factor(
            f1[:, None], f2[None, :], f, fiber.beta2, link.span_length, link.span_count
        )
        inner = np.sum(np.where(inside, zeta * nu, 0.0), axis=1) * g_d * g_d * h
        out[j] = prefactor * np.sum(g_sq_outer * np.abs(inner) ** 2) * h
    return out


def egn_correction_xci(
    plan: ChannelPlan,
    link: LinkConfig,
    cut: ChannelSpec,
    interferer: ChannelSpec,
    f_grid: np.ndarray,
    spacing: Optional[float] = None,
) -> np.ndarray:
    """Cross-channel correction for one (CUT, interferer) pair.

    Sums the enabled cross-channel catalogue terms; a complex-normal
    interferer makes every fourth-order term vanish identically.
    """
    total = np.zeros(len(f_grid))
    for term in correction_terms():
        if term["kind"] != "xci" or not term["enabled"]:
            continue
        num, den = term["coefficient"]
        if num == 0:
            continue
        doubled = interferer if term["doubled"] == "interferer" else cut
        outer = cut if term["doubled"] == "interferer" else interferer
        moments = modulation_moments(doubled.format)
        moment = moments.phi_b if term["moment"] == "phi" else moments.psi_b
        if moment == 0.0:
            continue
        total += _correction_term_psd(
            outer, doubled, plan, link, f_grid, num / den, moment, spacing
        )
    return total


def _sci_correction(plan, link, cut, f_grid, spacing=None) -> np.ndarray:
    total = np.zeros(len(f_grid))
    for term in correction_terms():
        if term["kind"] != "sci" or not term["enabled"]:
            continue
        num, den = term["coefficient"]
        if num == 0:
            continue
        moments = modulation_moments(cut.format)
        moment = moments.phi_b if term["moment"] == "phi" else moments.psi_b
        if moment == 0.0:
            continue
        total += _correction_term_psd(cut, cut, plan, link, f_grid, num / den, moment, spacing)
    return total


def egn_nli_psd(
    plan: ChannelPlan,
    link: LinkConfig,
    f_grid: np.ndarray,
    spacing: Optional[float] = None,
) -> NliPsd:
    """Corrected interference PSD: phase-blind part plus catalogue terms.

    Pre-dispersed channels are rejected: the correction terms keep the
    spectral phase, which this implementation does not model.
    """
    for ch in plan.channels:
        if ch.pre_dispersion != 0.0:
            raise ConfigError(
                "corrected model does not support pre-dispersed channels"
            )
    gn = gn_nli_psd(plan, link, f_grid, spacing)
    cut = plan.cut
    correction = _sci_correction(plan, link, cut, f_grid, spacing)
    for interferer in plan.interferers:
        correction += egn_correction_xci(plan, link, cut, interferer, f_grid, spacing)
    components = dict(gn.components)
    components["correction"] = correction
    components["total"] = gn.components["total"] + correction
    if np.any(components["total"] < -1e-30):
        raise NumericalError("corrected PSD went negative; quadrature too coarse")
    return NliPsd(gn.frequencies, components)


def replaced_int_adaptation(single_span_xmci: float, span_count: int) -> float:
    """Replaced-interferer adaptation: first-span power times span count."""
    if span_count < 1:
        raise ConfigError("span_count must be >= 1")
    return float(single_span_xmci) * span_count


def cut_band(plan: ChannelPlan) -> tuple[float, float]:
    """Frequency interval of the channel under test (full slot width)."""
    half = plan.spacing / 2.0
    return (plan.cut.center_offset - half, plan.cut.center_offset + half)


def model_xmci_power(
    plan: ChannelPlan,
    link: LinkConfig,
    model: str = "gn",
    n_points: int = 33,
    spacing: Optional[float] = None,
) -> float:
    """Cross/multi-channel power for a plan: full minus single-channel run.

    ``model`` selects "gn" or "egn".  The integration band is the CUT
    slot; the target grid is a uniform set of points across it.
    """
    lo, hi = cut_band(plan)
    f_grid = np.linspace(lo, hi, n_points)
    cut_plan = ChannelPlan((plan.cut,), plan.spacing, plan.symbol_rate, plan.roll_off)
    if model == "gn":
        full = gn_nli_psd(plan, link, f_grid, spacing)
        single = gn_nli_psd(cut_plan, link, f_grid, spacing)
    elif model == "egn":
        full = egn_nli_psd(plan, link, f_grid, spacing)
        single = egn_nli_psd(cut_plan, link, f_grid, spacing)
    else:
        raise ConfigError(f"unknown model {model!r}")
    return xmci_power(full, single, (lo, hi))
