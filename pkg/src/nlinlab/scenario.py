"""Scenario orchestration: cases A-D, parameter sweeps, model comparison.

Cases follow the accumulated-dispersion study:

* A - all channels start undispersed and co-propagate (point-to-point).
* B - interferers carry imposed accumulated dispersion, then co-propagate.
* C - like A, but interferers are exchanged for their launch state at
  the add/drop site after every span.
* D - like B with the per-span exchange; interferers then always carry
  more accumulated dispersion than the channel under test.

One loop pass per span: fiber, optional interferer replacement,
amplification, then a checkpoint receive on a duplicate, so a single
run yields every transmission distance.  Realizations differ in their
data, conditioning, PMD and replacement entropy; sweeps reuse the same
realization seeds so parameter effects are paired.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import config as config_mod
from . import metrics, models, units
from .errors import CalibrationMissing, ConfigError
from .fiber import PmdRealization, StepControl, amplify, propagate_span
from .link import LinkConfig
from .receiver import CoefficientStore, calibrate_fde, receive_checkpoint
from .roadm import replace_interferers
from .seeds import derive_seed
from .transmitter import ChannelPlan, build_channel_waveform, modulation_format, multiplex

CASES = ("A", "B", "C", "D")


@dataclass(frozen=True)
class Scenario:
    """A fully resolved simulation scenario."""

    name: str
    case: str
    plan: ChannelPlan
    link: LinkConfig
    n_symbols: int
    samples_per_symbol: int
    realizations: int
    seeds: tuple
    step: StepControl
    monitor_epsilon: float = 0.0
    acf_max_lag: int = 100

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigError(f"unknown case {self.case!r}")
        replaced = self.link.roadm.active
        if replaced != (self.case in ("C", "D")):
            raise ConfigError("ROADM activity inconsistent with the scenario case")
        pre = any(ch.pre_dispersion != 0.0 for ch in self.plan.interferers)
        if pre != (self.case in ("B", "D")):
            raise ConfigError("interferer pre-dispersion inconsistent with the scenario case")

    @property
    def replace_each_span(self) -> bool:
        return self.case in ("C", "D")


@dataclass
class ResultRow:
    """One measurement point; model fields are NaN when not computed."""

    scenario: str
    case: str
    span: int
    distance_km: float
    p_nli_w: float = math.nan
    p_nli_db: float = math.nan
    p_phase_w: float = math.nan
    p_circular_w: float = math.nan
    cnr_pct: float = math.nan
    n_opt: float = math.nan
    gn_w: float = math.nan
    egn_w: float = math.nan
    egn_adapted_w: float = math.nan

    COLUMNS = (
        "scenario", "case", "span", "distance_km",
        "p_nli_w", "p_nli_db", "p_phase_w", "p_circular_w", "cnr_pct", "n_opt",
        "gn_w", "egn_w", "egn_adapted_w",
    )


def realization_seeds(base_seed: int, count: int) -> tuple:
    return tuple(int(s) for s in np.random.SeedSequence(base_seed).generate_state(count))


def build_scenario(cfg: dict, case: str, name: Optional[str] = None) -> Scenario:
    plan = config_mod.plan_from(cfg, case)
    link = config_mod.link_from(cfg, case)
    tx = cfg["transmitter"]
    run = cfg["run"]
    label = name or (
        f"{case}-{tx['modulation_int']}-{tx['channel_spacing_ghz']:g}GHz-"
        f"{cfg['fiber']['length_km']:g}km"
    )
    return Scenario(
        name=label,
        case=case,
        plan=plan,
        link=link,
        n_symbols=tx["num_symbols"],
        samples_per_symbol=tx["samples_per_symbol"],
        realizations=run["realizations"],
        seeds=realization_seeds(run["base_seed"], run["realizations"]),
        step=config_mod.step_from(cfg, link, plan),
        monitor_epsilon=run["monitor_epsilon"],
        acf_max_lag=run["acf_max_lag"],
    )


def vary(scenario: Scenario, parameter: str, value) -> Scenario:
    """Scenario with one swept parameter changed, seeds shared.

    Supported parameters: span_length (km), channel_spacing (Hz) and
    modulation_format (of the interferers).
    """
    if parameter == "span_length":
        fiber = dataclasses.replace(scenario.link.fiber, length=value * 1e3)
        link = dataclasses.replace(scenario.link, fiber=fiber)
        plan = scenario.plan
    elif parameter == "channel_spacing":
        if value < (1.0 + scenario.plan.roll_off) * scenario.plan.symbol_rate:
            raise ConfigError("spacing below (1 + roll_off) * symbol_rate")
        chans = tuple(
            dataclasses.replace(ch, center_offset=ch.index * value)
            for ch in scenario.plan.channels
        )
        plan = dataclasses.replace(scenario.plan, channels=chans, spacing=value)
        roadm = scenario.link.roadm
        if roadm.active:
            roadm = dataclasses.replace(roadm, passband_width=value)
        link = dataclasses.replace(scenario.link, roadm=roadm)
    elif parameter == "modulation_format":
        fmt = modulation_format(value)
        chans = tuple(
            ch if ch.is_cut else dataclasses.replace(ch, format=fmt)
            for ch in scenario.plan.channels
        )
        plan = dataclasses.replace(scenario.plan, channels=chans)
        link = scenario.link
    else:
        raise ConfigError(f"unknown sweep parameter {parameter!r}")
    suffix = f"{parameter}={value:g}" if isinstance(value, (int, float)) else f"{parameter}={value}"
    return dataclasses.replace(scenario, name=f"{scenario.name}|{suffix}", plan=plan, link=link)


def calibration_store(scenario: Scenario, root) -> CoefficientStore:
    """Store scoped to everything the stored coefficients depend on."""
    key = derive_seed(
        int(scenario.plan.symbol_rate),
        int(scenario.plan.spacing),
        int(scenario.link.span_length),
        scenario.link.span_count,
        scenario.n_symbols,
        scenario.samples_per_symbol,
        scenario.step.steps_per_span or 0,
    )
    return CoefficientStore(f"{root}/cal_{key:08x}")


def calibrate_scenario(scenario: Scenario, store: CoefficientStore) -> int:
    """Run the zero-Kerr calibration for every realization seed."""
    n = 0
    for seed in scenario.seeds:
        n += len(
            calibrate_fde(
                scenario.link.linearized(),
                scenario.plan,
                seed,
                scenario.n_symbols,
                scenario.samples_per_symbol,
                store,
                scenario.step,
            )
        )
    return n


def _ensure_calibrated(scenario: Scenario, store: CoefficientStore) -> None:
    missing = []
    for seed in scenario.seeds:
        for span in range(1, scenario.link.span_count + 1):
            try:
                store.load(seed, span)
            except CalibrationMissing:
                missing.append((seed, span))
    if missing:
        raise CalibrationMissing(
            f"missing equalizer calibration for (seed, span) pairs {missing[:4]}"
            f"{'...' if len(missing) > 4 else ''}; run `calibrate` first"
        )


def run_scenario(
    scenario: Scenario,
    store: CoefficientStore,
    with_models: bool = False,
    collect_acf: bool = True,
) -> tuple[list, list]:
    """Simulate every realization and average the per-span noise reports.

    Returns (rows, acf_records); the ACF of the phase-noise trace is
    taken from the X polarization of the first realization, mirroring
    how such curves are usually reported.
    """
    _ensure_calibrated(scenario, store)
    plan, link = scenario.plan, scenario.link
    p_cut = plan.cut.launch_power
    reports = {span: [] for span in range(1, link.span_count + 1)}
    acf_records = []
    for r_index, seed in enumerate(scenario.seeds):
        fresh = []
        tx_symbols = None
        channels = []
        for spec in plan.channels:
            sym, wave = build_channel_waveform(
                spec, plan, scenario.n_symbols, scenario.samples_per_symbol, seed
            )
            channels.append((spec, wave))
            if spec.is_cut:
                tx_symbols = sym
            else:
                fresh.append((spec, wave))
        state = multiplex(channels, plan)
        roadm = dataclasses.replace(link.roadm, replacement_seed=seed)
        for span in range(1, link.span_count + 1):
            pmd = PmdRealization(seed, span)
            state = propagate_span(state, link.fiber, scenario.step, pmd)
            if scenario.replace_each_span:
                state = replace_interferers(state, plan, fresh, span, roadm)
            state = amplify(state, link.amplifier_gain_db)

            coeffs = store.load(seed, span)
            frame = receive_checkpoint(
                state, plan, link.truncated(span), coeffs, tx_symbols, scenario.step
            )
            scale = p_cut / frame.symbol_rate
            p_nli = metrics.noise_power(frame) * scale
            sep = metrics.separate_phase_circular(frame, epsilon=scenario.monitor_epsilon)
            p_phase = metrics.phase_noise_power(sep.phase, frame) * scale
            p_circ = metrics.circular_noise_power(sep.circular, frame.symbol_rate) * scale
            reports[span].append(
                metrics.NoiseReport.from_powers(
                    p_nli, p_phase, p_circ, sep.n_opt,
                    distance=span * link.span_length,
                    scenario=scenario.name, realization=r_index,
                )
            )
            if collect_acf and r_index == 0:
                acf = metrics.phase_acf(
                    metrics.PhaseTrace(sep.phase.delta_theta[:1]), scenario.acf_max_lag
                )
                acf_records.extend(
                    {"scenario": scenario.name, "span": span, "lag": lag, "acf": float(v)}
                    for lag, v in enumerate(acf)
                )
    rows = []
    for span in sorted(reports):
        mean = metrics.average_reports(reports[span])
        rows.append(
            ResultRow(
                scenario=scenario.name,
                case=scenario.case,
                span=span,
                distance_km=span * link.span_length / 1e3,
                p_nli_w=mean.p_nli,
                p_nli_db=units.lin_to_db(mean.p_nli / p_cut) if mean.p_nli > 0 else math.nan,
                p_phase_w=mean.p_phase,
                p_circular_w=mean.p_circular,
                cnr_pct=mean.cnr_percent,
                n_opt=mean.n_opt,
            )
        )
    if with_models:
        attach_model_predictions(rows, scenario)
    return rows, acf_records


def run_models(scenario: Scenario, n_points: int = 17) -> list:
    """Model predictions per span count as ResultRows (sim fields NaN).

    The phase-blind model ignores pre-dispersion and replacement, so it
    is evaluated for every case.  The corrected model rejects
    pre-dispersed plans (cases B and D); the replaced-interferer
    adaptation multiplies its single-span power by the span count and
    applies to the replacement cases only.
    """
    plan, link = scenario.plan, scenario.link
    rows = []
    pre_dispersed = scenario.case in ("B", "D")
    egn_plan = plan if not pre_dispersed else None
    egn_one = None
    if egn_plan is not None and scenario.replace_each_span:
        egn_one = models.model_xmci_power(egn_plan, link.truncated(1), "egn", n_points)
    for span in range(1, link.span_count + 1):
        sub = link.truncated(span)
        gn = models.model_xmci_power(plan, sub, "gn", n_points)
        egn = math.nan
        adapted = math.nan
        if egn_plan is not None:
            egn = models.model_xmci_power(egn_plan, sub, "egn", n_points)
            if scenario.replace_each_span:
                adapted = models.replaced_int_adaptation(egn_one, span)
        rows.append(
            ResultRow(
                scenario=scenario.name,
                case=scenario.case,
                span=span,
                distance_km=span * link.span_length / 1e3,
                gn_w=gn,
                egn_w=egn,
                egn_adapted_w=adapted,
            )
        )
    return rows


def attach_model_predictions(rows: Sequence[ResultRow], scenario: Scenario) -> None:
    model_rows = {r.span: r for r in run_models(scenario)}
    for row in rows:
        m = model_rows.get(row.span)
        if m is not None:
            row.gn_w, row.egn_w, row.egn_adapted_w = m.gn_w, m.egn_w, m.egn_adapted_w


def sweep(
    scenario: Scenario,
    parameter: str,
    values: Sequence,
    store_root,
    with_models: bool = False,
) -> dict:
    """Independent runs over parameter values with shared seeds."""
    out = {}
    for value in values:
        varied = vary(scenario, parameter, value)
        store = calibration_store(varied, store_root)
        calibrate_scenario(varied, store)
        rows, acf = run_scenario(varied, store, with_models=with_models)
        out[value] = (rows, acf)
    return out
