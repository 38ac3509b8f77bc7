"""Unit tests for the balanced-random-network benchmark harness."""

import numpy as np
import pytest

from fennsim import bench, net
from fennsim.bench import (FitError, VaParams, VaSpec, build_va, fit_perfmodel,
                           load_fixtures, make_input_raster, run_va,
                           split_8020, tuned_params)


class TestBuild:
    def test_split(self):
        n_exc, n_inh = split_8020(2560)
        assert n_exc % 32 == 0
        assert n_exc + n_inh == 2560
        assert abs(n_exc / 2560 - 0.8) < 0.02

    def test_structure(self):
        spec = VaSpec(512, T=10)
        params = VaParams(input_rate=0.01)
        m = build_va(spec, params)
        assert set(m.populations) == {"net"}
        assert set(m.inputs) == {"drive"}
        assert len(m.connections) == 2
        w = m.connections[1].weights
        n_exc, _ = split_8020(512)
        assert (w[:n_exc] >= 0).all()
        assert (w[n_exc:] <= 0).all()
        assert w[n_exc:].min() == -params.g * params.w_exc_raw

    def test_sparsity(self):
        spec = VaSpec(512, sparsity=0.9)
        m = build_va(spec, VaParams(input_rate=0.01))
        w = m.connections[1].weights
        density = (w != 0).mean()
        assert abs(density - 0.1) < 0.02

    def test_too_small_rejected(self):
        with pytest.raises(net.ModelError):
            build_va(VaSpec(48), VaParams(input_rate=0.01))

    def test_input_raster_rate(self):
        spec = VaSpec(512, T=200)
        params = VaParams(input_rate=0.05)
        raster = make_input_raster(spec, params)
        rate = np.bitwise_count(raster).sum() / (params.n_input * spec.T)
        assert abs(rate - 0.05) < 0.01


class TestFixtures:
    def test_fixture_file_well_formed(self):
        fx = load_fixtures()
        assert "provenance" in fx
        assert fx["provenance"]["target_rate"] == pytest.approx(0.01)
        assert "2560_90" in fx["tuned"]

    def test_tuned_params_round_trip(self):
        p = tuned_params(VaSpec(2560, sparsity=0.9))
        assert isinstance(p, VaParams)
        assert 0.0 < p.input_rate < 0.2


class TestRun:
    def test_report_engines_agree(self):
        """Golden-engine and instruction-simulator reports are identical."""
        spec = VaSpec(128, T=12)
        params = VaParams(input_rate=0.02, n_input=128)
        a = run_va(spec, params, engine="golden")
        b = run_va(spec, params, engine="sim")
        assert a == b

    def test_report_contents(self):
        spec = VaSpec(512, T=20)
        r = run_va(spec, VaParams(input_rate=0.01))
        assert r["cycles"] == r["update_cycles"] + r["propagation_cycles"] \
            + (r["cycles"] - r["update_cycles"] - r["propagation_cycles"])
        assert r["peak_gsops"] == pytest.approx(175e6 * 32 / 4 / 1e9)
        assert r["modeled_seconds"] == pytest.approx(r["cycles"] / 175e6)
        assert r["sops"] > 0
        assert r["effective_sops"] >= r["sops"]

    def test_unknown_engine(self):
        with pytest.raises(ValueError):
            run_va(VaSpec(512, T=2), VaParams(input_rate=0.01), engine="fpga")


class TestFit:
    def test_exact_model_recovered(self):
        c_n, c_s = 2.5, 0.125
        points = [(n, t, s, int(c_n * n * t + c_s * s))
                  for n, t, s in ((1000, 100, 400000), (2000, 100, 1600000),
                                  (4000, 50, 3000000), (8000, 25, 5000000))]
        fit = fit_perfmodel(points)
        assert fit["c_neuron"] == pytest.approx(c_n, rel=1e-3)
        assert fit["c_sop"] == pytest.approx(c_s, rel=1e-3)
        assert fit["r2"] > 0.999

    def test_too_few_points(self):
        with pytest.raises(FitError):
            fit_perfmodel([(1, 1, 1, 1)] * 3)

    def test_degenerate_design(self):
        with pytest.raises(FitError):
            fit_perfmodel([(1000, 10, 0, 5)] * 4)
