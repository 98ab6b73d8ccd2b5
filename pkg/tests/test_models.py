import dataclasses

import numpy as np
import pytest

from nlinlab import units
from nlinlab.errors import ConfigError
from nlinlab.fiber import effective_length, fiber_from_telecom_units
from nlinlab.link import LinkConfig
from nlinlab.models import (
    NliPsd,
    coherence_factor,
    correction_terms,
    cut_band,
    egn_nli_psd,
    fwm_efficiency,
    gn_nli_psd,
    model_xmci_power,
    modulation_moments,
    quadrature_grid,
    replaced_int_adaptation,
    wdm_psd,
    xmci_power,
)
from nlinlab.roadm import RoadmConfig
from nlinlab.transmitter import GAUSSIAN, QAM16, QPSK, ChannelPlan, build_plan

P_CH = units.dbm_to_watt(3.0)
FIBER = fiber_from_telecom_units(80.0, 0.19, 16.8, 2.25e-20, 84.95)
LINK = LinkConfig(10, FIBER, RoadmConfig(), P_CH)


def plan_with(int_format=QPSK, n_ch=5, spacing=37.5e9, power=P_CH, pre=0.0):
    return build_plan(n_ch, spacing, 28e9, 0.2, QAM16, int_format, power, pre)


class TestModulationMoments:
    def test_gaussian(self):
        m = modulation_moments(GAUSSIAN)
        assert m.phi_b == 0.0
        assert m.psi_b == 0.0

    def test_qpsk(self):
        m = modulation_moments(QPSK)
        assert m.phi_b == pytest.approx(-1.0, abs=1e-12)

    def test_16qam(self):
        m = modulation_moments(QAM16)
        assert m.fourth == pytest.approx(1.32, abs=1e-12)
        assert m.phi_b == pytest.approx(-0.68, abs=1e-12)

    def test_cauchy_schwarz(self):
        for fmt in (QPSK, QAM16, GAUSSIAN):
            m = modulation_moments(fmt)
            assert m.fourth >= m.second**2


class TestFwmEfficiency:
    def test_phase_matched_effective_length(self):
        z = fwm_efficiency(1e9, 5e9, 1e9, FIBER, 80e3)
        expected = FIBER.gamma * effective_length(FIBER.attenuation, 80e3)
        assert z == pytest.approx(expected, rel=1e-12)

    def test_lossless_phase_matched_limit(self):
        lossless = dataclasses.replace(FIBER, attenuation=0.0)
        z = fwm_efficiency(2e9, 7e9, 2e9, lossless, 80e3)
        assert z == pytest.approx(lossless.gamma * 80e3, rel=1e-9)

    def test_argument_symmetry(self):
        a = fwm_efficiency(3e9, -7e9, 1e9, FIBER, 80e3)
        b = fwm_efficiency(-7e9, 3e9, 1e9, FIBER, 80e3)
        assert a == pytest.approx(b, rel=1e-14)


class TestCoherenceFactor:
    def test_single_span_unity(self):
        v = coherence_factor(4e9, -11e9, 1e9, FIBER.beta2, 80e3, 1)
        assert v == pytest.approx(1.0, abs=1e-12)

    def test_phase_matched_dirichlet_peak(self):
        v = coherence_factor(1e9, 5e9, 1e9, FIBER.beta2, 80e3, 10)
        assert abs(v) == pytest.approx(10.0, rel=1e-9)

    def test_bounded_by_span_count(self):
        rng = np.random.default_rng(3)
        f1 = rng.uniform(-100e9, 100e9, 200)
        f2 = rng.uniform(-100e9, 100e9, 200)
        v = coherence_factor(f1, f2, 0.0, FIBER.beta2, 80e3, 7)
        assert np.all(np.abs(v) <= 7.0 + 1e-9)

    def test_near_singular_arguments(self):
        # x exactly pi: sin(x) = 0, limit +-N
        x_target = np.pi
        prod = x_target / (2 * np.pi**2 * FIBER.beta2 * 80e3)
        f1 = 1e9
        f2 = prod / f1
        v = coherence_factor(f1 + 0.0, f2, 0.0, FIBER.beta2, 80e3, 5)
        assert abs(v) == pytest.approx(5.0, rel=1e-6)

    def test_span_count_validation(self):
        with pytest.raises(ConfigError):
            coherence_factor(1e9, 1e9, 0.0, FIBER.beta2, 80e3, 0)


class TestGnModel:
    def test_power_scaling_cubed(self):
        base = model_xmci_power(plan_with(power=P_CH), LINK, "gn", n_points=9)
        doubled = model_xmci_power(plan_with(power=2 * P_CH), LINK, "gn", n_points=9)
        assert doubled / base == pytest.approx(8.0, rel=0.005)
        half = model_xmci_power(plan_with(power=P_CH / 2), LINK, "gn", n_points=9)
        assert base / half == pytest.approx(8.0, rel=0.005)

    def test_invariant_to_pre_dispersion_bitwise(self):
        f_grid = np.linspace(-10e9, 10e9, 5)
        a = gn_nli_psd(plan_with(pre=0.0), LINK, f_grid)
        b = gn_nli_psd(plan_with(pre=units.accumulated_dispersion_ps_nm_to_si(13000.0)),
                       LINK, f_grid)
        assert np.array_equal(a.total, b.total)

    def test_invariant_to_modulation_bitwise(self):
        f_grid = np.linspace(-10e9, 10e9, 5)
        a = gn_nli_psd(plan_with(QPSK), LINK, f_grid)
        b = gn_nli_psd(plan_with(GAUSSIAN), LINK, f_grid)
        assert np.array_equal(a.total, b.total)

    def test_nonnegative_and_decomposed(self):
        f_grid = np.linspace(-15e9, 15e9, 7)
        psd = gn_nli_psd(plan_with(), LINK, f_grid)
        assert np.all(psd.total >= 0)
        for key in ("sci", "xci", "mci"):
            assert np.all(psd.components[key] >= -1e-30)
        recon = psd.components["sci"] + psd.components["xci"] + psd.components["mci"]
        assert np.allclose(recon, psd.total, rtol=1e-9)

    def test_single_channel_pure_sci(self):
        plan = ChannelPlan((plan_with().cut,), 37.5e9, 28e9, 0.2)
        f_grid = np.linspace(-10e9, 10e9, 5)
        psd = gn_nli_psd(plan, LINK, f_grid)
        assert np.all(psd.components["xci"] == 0)
        assert np.all(psd.components["mci"] == 0)
        assert np.allclose(psd.components["sci"], psd.total)

    def test_grid_refinement_convergence(self):
        plan = plan_with(n_ch=3)
        coarse = model_xmci_power(plan, LINK, "gn", n_points=9, spacing=28e9 / 32)
        fine = model_xmci_power(plan, LINK, "gn", n_points=9, spacing=28e9 / 64)
        assert fine == pytest.approx(coarse, rel=0.01)

    def test_spacing_ordering(self):
        values = [
            model_xmci_power(plan_with(spacing=s, n_ch=3), LINK, "gn", n_points=9)
            for s in (37.5e9, 50e9, 62.5e9)
        ]
        assert values[0] > values[1] > values[2]


class TestXmciPower:
    def test_no_interferers_zero(self):
        plan = plan_with(n_ch=3)
        single = ChannelPlan((plan.cut,), plan.spacing, plan.symbol_rate, plan.roll_off)
        f_grid = np.linspace(-18e9, 18e9, 9)
        a = gn_nli_psd(single, LINK, f_grid)
        assert xmci_power(a, a, (-18.75e9, 18.75e9)) == 0.0

    def test_constant_difference(self):
        f = np.linspace(-10e9, 10e9, 21)
        g0 = 1e-18
        full = NliPsd(f, {"total": np.full(f.size, 2 * g0)})
        single = NliPsd(f, {"total": np.full(f.size, g0)})
        assert xmci_power(full, single, (-10e9, 10e9)) == pytest.approx(g0 * 20e9, rel=1e-12)

    def test_grid_mismatch(self):
        f = np.linspace(-10e9, 10e9, 21)
        a = NliPsd(f, {"total": np.zeros(f.size)})
        b = NliPsd(f + 1.0, {"total": np.zeros(f.size)})
        with pytest.raises(ConfigError):
            xmci_power(a, b, (-10e9, 10e9))


class TestEgnModel:
    def test_all_gaussian_equals_gn(self):
        plan = build_plan(5, 37.5e9, 28e9, 0.2, GAUSSIAN, GAUSSIAN, P_CH)
        gn = model_xmci_power(plan, LINK, "gn", n_points=9)
        egn = model_xmci_power(plan, LINK, "egn", n_points=9)
        assert abs(egn - gn) < 0.01 * gn

    def test_qpsk_interferers_below_gn(self):
        plan = plan_with(QPSK)
        gn = model_xmci_power(plan, LINK, "gn", n_points=9)
        egn = model_xmci_power(plan, LINK, "egn", n_points=9)
        assert egn < gn

    def test_gaussian_interferer_correction_vanishes(self):
        from nlinlab.models import egn_correction_xci
        plan = plan_with(GAUSSIAN)
        corr = egn_correction_xci(plan, LINK, plan.cut, plan.interferers[0],
                                  np.linspace(-5e9, 5e9, 3))
        assert np.all(corr == 0.0)

    def test_interferer_power_squared_scaling(self):
        from nlinlab.models import egn_correction_xci
        plan1 = plan_with(QPSK, power=P_CH)
        plan2 = plan_with(QPSK, power=P_CH)
        f_grid = np.linspace(-5e9, 5e9, 3)
        int1 = plan1.interferers[0]
        int2 = dataclasses.replace(int1, launch_power=2 * int1.launch_power)
        c1 = egn_correction_xci(plan1, LINK, plan1.cut, int1, f_grid)
        c2 = egn_correction_xci(plan2, LINK, plan2.cut, int2, f_grid)
        assert c2 == pytest.approx(4 * c1, rel=1e-9)

    def test_rejects_pre_dispersed_plan(self):
        plan = plan_with(pre=units.accumulated_dispersion_ps_nm_to_si(13000.0))
        with pytest.raises(ConfigError):
            egn_nli_psd(plan, LINK, np.linspace(-5e9, 5e9, 3))

    def test_total_nonnegative(self):
        psd = egn_nli_psd(plan_with(QPSK), LINK, np.linspace(-15e9, 15e9, 7))
        assert np.all(psd.total >= 0)

    def test_term_catalogue_structure(self):
        terms = correction_terms()
        names = {t["name"] for t in terms}
        assert "xci_fourth_main" in names
        main = next(t for t in terms if t["name"] == "xci_fourth_main")
        assert main["coefficient"] == [80, 81]
        assert main["doubled"] == "interferer"
        assert main["enabled"]


class TestAdaptation:
    def test_single_span_identity(self):
        assert replaced_int_adaptation(1e-6, 1) == 1e-6

    def test_linear_in_span_count(self):
        assert replaced_int_adaptation(1e-6, 10) == pytest.approx(1e-5, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ConfigError):
            replaced_int_adaptation(1e-6, 0)


class TestWdmPsd:
    def test_integrates_to_total_power(self):
        plan = plan_with(n_ch=5)
        grid = quadrature_grid(plan)
        psd = wdm_psd(plan, grid)
        total = np.trapezoid(psd, grid)
        assert total == pytest.approx(5 * P_CH, rel=1e-6)

    def test_cut_band_interval(self):
        plan = plan_with()
        lo, hi = cut_band(plan)
        assert hi - lo == pytest.approx(plan.spacing)
