"""Configuration profiles and YAML loading.

Every tabulated system parameter (transmitter, laser, amplifiers,
fiber, ROADM, receiver, link, run control) is addressable through a
key-value tree.  Unknown keys are errors, as are values that would
silently contradict fixed structural choices (header layout, equalizer
grid, rectangular filters).
"""

import copy
from pathlib import Path

import yaml
from scipy.constants import c as C_VACUUM

from . import units
from .errors import ConfigError
from .fiber import StepControl, fiber_from_telecom_units
from .link import LinkConfig
from .roadm import RoadmConfig
from .transmitter import (
    TRAINING_BLOCKS,
    TRAINING_BLOCK_LENGTH,
    build_plan,
    modulation_format,
)
from .receiver import DSP_SAMPLES_PER_SYMBOL, FDE_TAPS

_MANAKOV = 8.0 / 9.0

_BASE = {
    "transmitter": {
        "symbol_rate_gbd": 28.0,
        "num_symbols": 8192,
        "channels": 5,
        "channel_spacing_ghz": 37.5,
        "roll_off": 0.2,
        "modulation_cut": "16QAM",
        "modulation_int": "16QAM",
        "samples_per_symbol": 16,
        "training_blocks": TRAINING_BLOCKS,
        "training_block_length": TRAINING_BLOCK_LENGTH,
    },
    "laser": {"center_frequency_thz": 193.4, "linewidth_hz": 0.0},
    "pre_dispersion": {"interferer_ps_nm": 13000.0},
    "amplifiers": {"tx_output_dbm_per_channel": 3.0, "loop_gain": "fiber_loss", "noise": "none"},
    "fiber": {
        "length_km": 80.0,
        "attenuation_db_km": 0.19,
        "dispersion_ps_nm_km": 16.8,
        "pmd_ps_sqrt_km": 0.1,
        "nonlinear_index_m2_per_w": 2.25e-20,
        "core_area_um2": 84.95,
        "nonlinear_coupling": _MANAKOV,
    },
    "roadm": {"filter_shape": "rectangular", "bandwidth": "channel_spacing"},
    "receiver": {
        "filter_bandwidth": "channel_spacing",
        "filter_shape": "rectangular",
        "samples_per_symbol": DSP_SAMPLES_PER_SYMBOL,
        "fde_taps": FDE_TAPS,
        "fde_criterion": "loaded",
    },
    "link": {"span_count": 10},
    "run": {
        "realizations": 2,
        "base_seed": 1234,
        "steps_per_span": 80,
        "monitor_epsilon": 0.0,
        "acf_max_lag": 100,
    },
}

PROFILES = {
    "desk": {},
    "thesis": {
        "transmitter": {"num_symbols": 65536, "channels": 9, "samples_per_symbol": 24},
        "run": {"realizations": 5},
    },
}


def _deep_merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be a section")
            out[key] = _deep_merge(base[key], value, where)
        else:
            out[key] = value
    return out


def profile_config(profile: str = "desk") -> dict:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r} (expected one of {sorted(PROFILES)})")
    return _deep_merge(_BASE, PROFILES[profile])


def load_config(path=None, profile: str = "desk") -> dict:
    """Profile defaults overlaid with an optional YAML file."""
    cfg = profile_config(profile)
    if path is not None:
        text = Path(path).read_text()
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigError("configuration file must be a mapping")
        file_profile = data.pop("profile", None)
        if file_profile is not None and file_profile != profile:
            cfg = profile_config(file_profile)
        cfg = _deep_merge(cfg, data)
    _validate_structural(cfg)
    return cfg


def _validate_structural(cfg: dict) -> None:
    tx = cfg["transmitter"]
    if tx["training_blocks"] != TRAINING_BLOCKS or tx["training_block_length"] != TRAINING_BLOCK_LENGTH:
        raise ConfigError(
            f"the training header is fixed at {TRAINING_BLOCKS} blocks of {TRAINING_BLOCK_LENGTH} symbols"
        )
    rx = cfg["receiver"]
    if rx["samples_per_symbol"] != DSP_SAMPLES_PER_SYMBOL:
        raise ConfigError("the receiver chain runs at 2 samples per symbol")
    if rx["fde_taps"] != FDE_TAPS:
        raise ConfigError(f"the equalizer grid is fixed at {FDE_TAPS} bins")
    for section, key in (("roadm", "filter_shape"), ("receiver", "filter_shape")):
        if cfg[section][key] != "rectangular":
            raise ConfigError(f"{section}.{key}: only rectangular filters are implemented")
    if cfg["amplifiers"]["noise"] != "none":
        raise ConfigError("amplifier noise models are not implemented")
    if cfg["transmitter"]["num_symbols"] <= TRAINING_BLOCKS * TRAINING_BLOCK_LENGTH:
        raise ConfigError("num_symbols must exceed the training header length")


def wavelength_from(cfg: dict) -> float:
    return C_VACUUM / (cfg["laser"]["center_frequency_thz"] * 1e12)


def plan_from(cfg: dict, case: str = "A") -> "ChannelPlan":
    """Channel plan for a scenario case (B and D pre-disperse interferers)."""
    tx = cfg["transmitter"]
    pre = 0.0
    if case in ("B", "D"):
        pre = units.accumulated_dispersion_ps_nm_to_si(cfg["pre_dispersion"]["interferer_ps_nm"])
    return build_plan(
        n_channels=tx["channels"],
        spacing=tx["channel_spacing_ghz"] * 1e9,
        symbol_rate=tx["symbol_rate_gbd"] * 1e9,
        roll_off=tx["roll_off"],
        cut_format=modulation_format(tx["modulation_cut"]),
        int_format=modulation_format(tx["modulation_int"]),
        launch_power=units.dbm_to_watt(cfg["amplifiers"]["tx_output_dbm_per_channel"]),
        int_pre_dispersion=pre,
    )


def link_from(cfg: dict, case: str = "A") -> LinkConfig:
    fib = cfg["fiber"]
    fiber = fiber_from_telecom_units(
        length_km=fib["length_km"],
        attenuation_db_km=fib["attenuation_db_km"],
        dispersion_ps_nm_km=fib["dispersion_ps_nm_km"],
        n2_m2_w=fib["nonlinear_index_m2_per_w"],
        core_area_um2=fib["core_area_um2"],
        pmd_ps_sqrt_km=fib["pmd_ps_sqrt_km"],
        wavelength=wavelength_from(cfg),
        nonlinear_coupling=fib["nonlinear_coupling"],
    )
    roadm = RoadmConfig(
        active=case in ("C", "D"),
        passband_width=cfg["transmitter"]["channel_spacing_ghz"] * 1e9 if case in ("C", "D") else 0.0,
    )
    return LinkConfig(
        span_count=cfg["link"]["span_count"],
        fiber=fiber,
        roadm=roadm,
        launch_power_per_channel=units.dbm_to_watt(cfg["amplifiers"]["tx_output_dbm_per_channel"]),
    )


def step_from(cfg: dict, link: LinkConfig, plan) -> StepControl:
    """Step control with the count pinned for reproducible PMD grids.

    ``run.steps_per_span`` fixes the count directly (the profile values
    are validated by the self-convergence tests); a null value resolves
    the count from the default phase criterion at the composite launch
    power.
    """
    n = cfg["run"]["steps_per_span"]
    if n is not None:
        return StepControl(steps_per_span=int(n))
    total = link.launch_power_per_channel * len(plan.channels)
    return StepControl().resolve(link.fiber, total)
