import math

import numpy as np
import pytest

from thinfilm.diagnostics import (
    DiagnosticsRecord,
    DiagnosticsRecorder,
    MonitorResult,
    as_rows,
    check_energy_law,
    check_global_roughness_bound,
    energy,
    energy_parts,
    global_growth_rate,
    h2_bound,
    interpolated_growth_constant,
    local_growth_rate,
    read_series,
    record,
    rough_smooth_rough,
    roughness,
    seminorms,
    steady_residual,
    steady_state_time,
    write_series,
)
from thinfilm.es_model import EsParams, lower_bound_constant
from thinfilm.spectral_grid import GridSpec, RealField
from thinfilm.stepper import ModelConfig, build, run, step

from conftest import PRESET, preset_model, random_field

# 4 pi^2 G_1(0), extended precision
ENERGY_FLAT_K1 = 0.36116102294041917501


def example1(grid):
    x, y = grid.scaled_coordinates()
    return RealField(grid, 0.1 * (np.sin(3 * x) * np.sin(2 * y) + np.sin(5 * x) * np.sin(5 * y)))


def rec(t, omega=0.0, energy=0.0, rate=0.0):
    return DiagnosticsRecord(t, omega, energy, 0.0, 0.0, 0.0, 0.0, 0.0, rate)


class TestRoughness:
    def test_constant(self):
        assert roughness(RealField(GridSpec.square(8), np.full((8, 8), 3.0))) == 0.0

    def test_example1(self):
        assert roughness(example1(GridSpec.square(128))) == pytest.approx(0.1 / math.sqrt(2), rel=1e-13)

    def test_homogeneous(self, rng):
        h = random_field(GridSpec.square(16), rng)
        assert roughness(h * -2.5) == pytest.approx(2.5 * roughness(h), rel=1e-14)

    def test_matches_l2(self, rng):
        g = GridSpec(16, 32, L1=2.0, L2=5.0)
        h = random_field(g, rng, smooth=False)
        assert g.area * roughness(h) ** 2 == pytest.approx(seminorms(h)[0], rel=1e-12)


class TestEnergy:
    def test_flat(self):
        m = preset_model(1, N=16)
        assert energy(RealField.zeros(m.grid), m) == pytest.approx(ENERGY_FLAT_K1, rel=1e-13)

    def test_parts_sum(self, rng):
        m = preset_model(1, N=32, gamma=0.3)
        h = random_field(m.grid, rng)
        parts = energy_parts(h, m)
        _, grad_sq, lap_sq = seminorms(h)
        assert parts.gradient == pytest.approx(0.15 * grad_sq, rel=1e-14)
        assert parts.curvature == pytest.approx(0.5 * m.epsilon_sq * lap_sq, rel=1e-14)
        assert parts.total == pytest.approx(energy(h, m), rel=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_lower_bound(self, k, rng):
        m = preset_model(k, N=32)
        beta = m.epsilon_sq * m.grid.kappa_min**2 / 2
        floor = -lower_bound_constant(m.es, beta) * m.grid.area
        for scale in (1e-3, 1.0, 30.0):
            assert energy(random_field(m.grid, rng, smooth=False) * scale, m) >= floor

    def test_strong_funneling_relaxes_to_flat(self):
        m = preset_model(1, N=32, dt=0.1, gamma=0.64)
        s = build(m, example1(m.grid))
        e0 = energy(s.h, m)
        s = run(s, m, 100.0)
        e1 = energy(s.h, m)
        assert e1 - ENERGY_FLAT_K1 < 0.1 * (e0 - ENERGY_FLAT_K1)
        assert roughness(s.h) < 0.05 * roughness(example1(m.grid))


class TestResidual:
    def test_identical(self, rng):
        h = random_field(GridSpec.square(8), rng)
        assert steady_residual(h, h, 0.1) == 0.0

    def test_linear_step_hand_value(self):
        g = GridSpec.square(16)
        m = ModelConfig(EsParams(2, 1e-14, 0.068, 0.408), g, 0.0078125, gamma=0.5, dt=0.1)
        x, y = g.coordinates()
        h0 = RealField(g, np.sin(x) * np.sin(2 * y))
        s1 = step(build(m, h0), m)
        factor = 10.0 / (10.0 + 0.5 * 5 + 0.0078125 * 25)
        expected = (1 - factor) * math.pi / 0.1  # ||sin x sin 2y|| = pi
        assert steady_residual(h0, s1.h, 0.1) == pytest.approx(expected, rel=1e-10)

    def test_record_fields(self):
        m = preset_model(1, N=16)
        s0 = build(m, example1(m.grid))
        s1 = step(s0, m)
        r = record(s1, m, s0)
        assert r.t == pytest.approx(0.01)
        assert r.increment_rate == pytest.approx(steady_residual(s0.h, s1.h, 0.01))
        assert r.h_min <= r.mean <= r.h_max


class TestGlobalBound:
    def test_constants(self):
        assert global_growth_rate(PRESET.es1) == pytest.approx(2 * 0.05 * 0.34)
        assert global_growth_rate(PRESET.es3) == pytest.approx(2 * 0.017)
        with pytest.raises(ValueError):
            global_growth_rate(PRESET.es2)

    def test_flat_series(self):
        series = [(0.1 * i, 0.3) for i in range(20)]
        res = check_global_roughness_bound(series, PRESET.es1)
        assert res.passed
        assert res.value == pytest.approx(2 * 0.05 * 0.34 * 0.1)

    def test_violation(self):
        series = [(0.0, 0.1), (1.0, 0.1), (2.0, 2.0)]
        res = check_global_roughness_bound(series, PRESET.es1)
        assert not res.passed and res.value < 0
        assert "t0=1" in res.detail

    def test_thinning_keeps_endpoints(self):
        t = np.linspace(0, 10, 5000)
        w = np.sqrt(0.01 + 0.0339 * t)
        res = check_global_roughness_bound(list(zip(t, w)), PRESET.es1)
        assert res.passed

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            check_global_roughness_bound([(1.0, 0.1), (0.5, 0.1)], PRESET.es1)

    def test_simulated_run(self):
        m = preset_model(1, N=32, dt=0.05)
        rec_ = DiagnosticsRecorder(m)
        s = build(m, example1(m.grid))
        rec_.start(s)
        run(s, m, 20.0, [rec_])
        assert check_global_roughness_bound(as_rows(rec_.records, "t", "omega"), m.es).passed


class TestEnergyLaw:
    def test_increasing_fails_first(self):
        rows = [(0.01 * i, 1.0 + 0.1 * i, 0.0) for i in range(5)]
        res = check_energy_law(rows, 0.01)
        assert not res.passed and "record 1" in res.detail

    def test_budget_absorbs_forcing(self):
        rows = [(0.0, 1.0, 0.0), (0.1, 1.04, 1.0), (0.2, 1.09, 1.0)]
        assert check_energy_law(rows, 0.1).passed
        assert not check_energy_law([(0.0, 1.0, 0.0), (0.1, 1.06, 1.0)], 0.1).passed

    def test_records_closer_than_step(self):
        with pytest.raises(ValueError):
            check_energy_law([(0.0, 1.0, 0.0), (0.001, 1.0, 0.0)], 0.01)

    def test_single_record(self):
        assert check_energy_law([(0.0, 1.0, 0.0)], 0.01).passed


class TestReportOnly:
    def test_local_rate_exponential(self):
        t = np.linspace(0, 2, 21)
        assert local_growth_rate(list(zip(t, np.exp(0.35 * t)))) == pytest.approx(0.7)

    def test_interpolated_constant(self):
        t = np.linspace(0, 2, 21)
        w = (0.5 * t + 1.0) ** 0.75
        assert interpolated_growth_constant(list(zip(t, w))) == pytest.approx(0.5)

    def test_rough_smooth_rough(self):
        assert rough_smooth_rough([(0, 1.0), (1, 0.5), (2, 1.5)])
        assert not rough_smooth_rough([(0, 1.0), (1, 1.2), (2, 1.5)])
        assert not rough_smooth_rough([(0, 1.0), (1, 0.5), (2, 0.8)])

    def test_steady_state_time(self):
        recs = [rec(0.1 * i, rate=1.0 if i < 50 else 1e-7) for i in range(200)]
        assert steady_state_time(recs) == pytest.approx(5.0)
        assert steady_state_time(recs[:120]) is None

    def test_steady_state_resets(self):
        recs = [rec(i, rate=1e-7) for i in range(99)] + [rec(99, rate=1.0)] + [rec(100 + i, rate=1e-7) for i in range(100)]
        assert steady_state_time(recs) == 100

    def test_monitor_lines(self):
        assert MonitorResult("x", True, 0.0, "ok").line() == "PASS x: ok"
        assert MonitorResult("x", False, 0.0, "bad").line() == "FAIL x: bad"
        assert MonitorResult("x", False, 0.0, "n", asserted=False).line() == "INFO x: n"


class TestSeries:
    def test_round_trip(self, tmp_path):
        m = preset_model(1, N=16)
        r = DiagnosticsRecorder(m, every=2)
        s = build(m, example1(m.grid))
        r.start(s)
        run(s, m, 0.1, [r])
        assert [x.t for x in r.records] == pytest.approx([0.0, 0.02, 0.04, 0.06, 0.08, 0.1])
        write_series(tmp_path / "s.csv", r.records)
        assert read_series(tmp_path / "s.csv") == r.records

    def test_bad_header(self, tmp_path):
        (tmp_path / "s.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_series(tmp_path / "s.csv")

    def test_cadence_validated(self):
        with pytest.raises(ValueError):
            DiagnosticsRecorder(preset_model(1, N=8), every=0)


def test_h2_bound_value():
    m = preset_model(1, N=32)
    beta = m.epsilon_sq / 4
    expected = 4 / m.epsilon_sq * (1.0 + lower_bound_constant(m.es, beta) * m.grid.area)
    assert h2_bound(m, 1.0) == pytest.approx(expected, rel=1e-14)
