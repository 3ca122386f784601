from dataclasses import replace

import numpy as np
import pytest
from conftest import random_panel
from scipy import stats

from lrst import (
    BonferroniResult,
    DegenerateVariance,
    PValueMethod,
    TrialDataset,
    bapi_default_scenario,
    bonferroni_univariate,
    component_zscore,
    gen_trial,
    multi_arm_lrst,
    select_dose,
    two_arm_lrst,
)
from lrst.numerics import Phi, max2_pvalue


def _null(A, n_control, seed, n_doses=None):
    return bapi_default_scenario(A, n_control, n_doses=n_doses, seed=seed)


class TestComponents:
    def test_copy_gives_zero(self, rng):
        x = rng.normal(size=(8, 3, 2))
        ds = TrialDataset.from_arrays(x, [x.copy()])
        assert component_zscore(ds, "dose1") == 0.0

    def test_two_arm_matches_multi_arm_component(self):
        ds = gen_trial(_null(2, 60, seed=3).with_multipliers((0.5, 1.0)), 0)
        res = multi_arm_lrst(ds)
        for a, arm in enumerate(ds.dose_arms):
            assert component_zscore(ds, arm) == pytest.approx(res.components[a], rel=1e-12)

    def test_normal_p_value(self):
        ds = gen_trial(_null(1, 40, seed=4), 0)
        res = two_arm_lrst(ds)
        assert res.p_value_method is PValueMethod.CLOSED_FORM_NORMAL
        assert res.p_value == 1 - Phi(res.statistic)
        assert 1 - Phi(1.645) == pytest.approx(0.05, abs=1e-4)
        assert 1 - Phi(0.0) == 0.5

    def test_two_arm_requires_single_dose(self, rng):
        with pytest.raises(ValueError):
            two_arm_lrst(random_panel(rng, (4, 4, 4)))

    def test_degenerate(self):
        ds = TrialDataset.from_arrays(np.ones((4, 2, 1)), [np.ones((3, 2, 1))])
        with pytest.raises(DegenerateVariance):
            multi_arm_lrst(ds)

    def test_per_visit_convention(self):
        ds = gen_trial(_null(2, 50, seed=5), 1)
        res = multi_arm_lrst(ds)
        assert res.statistic_per_visit == res.statistic / 6
        d = res.to_dict()
        assert d["statistic"]["z_scale"] == res.statistic
        assert set(d["theta_hat"]) == {"low", "high"}


class TestMultiArm:
    def test_methods_by_arm_count(self):
        for A, method in ((1, PValueMethod.CLOSED_FORM_NORMAL), (2, PValueMethod.CLOSED_FORM_MAX2), (3, PValueMethod.MONTE_CARLO)):
            res = multi_arm_lrst(gen_trial(_null(A, 30, seed=6), 0), mc_draws=20_000)
            assert res.p_value_method is method
            assert 0.0 <= res.p_value <= 1.0
            assert (res.mc_std_error is None) == (A < 3)

    def test_a1_reduction(self):
        ds = gen_trial(_null(1, 50, seed=7).with_multipliers((0.4,)), 2)
        assert multi_arm_lrst(ds).p_value == two_arm_lrst(ds).p_value

    def test_a2_uses_estimated_correlation(self):
        ds = gen_trial(_null(2, 80, seed=8), 0)
        res = multi_arm_lrst(ds)
        assert res.p_value == max2_pvalue(res.statistic, res.correlation[0, 1])
        R = res.correlation
        np.testing.assert_array_equal(R, R.T)
        assert np.all(np.diag(R) == 1.0)
        assert np.all(np.abs(R[np.triu_indices(2, 1)]) <= 0.999)

    def test_mc_reproducible(self):
        ds = gen_trial(_null(3, 40, seed=9), 0)
        a = multi_arm_lrst(ds, mc_draws=50_000, seed=11)
        b = multi_arm_lrst(ds, mc_draws=50_000, seed=11)
        assert a.p_value == b.p_value and a.mc_std_error == b.mc_std_error

    def test_forced_mc_close_to_closed_form(self):
        ds = gen_trial(_null(2, 60, seed=10), 0)
        closed = multi_arm_lrst(ds)
        mc = multi_arm_lrst(ds, method="mc", mc_draws=200_000, seed=1)
        assert mc.p_value_method is PValueMethod.MONTE_CARLO
        assert abs(mc.p_value - closed.p_value) < 3 * mc.mc_std_error

    def test_harmonization_is_automatic(self):
        ds = gen_trial(_null(2, 60, seed=12).with_multipliers((0, 1.5)), 0)
        assert multi_arm_lrst(ds).selected_dose == "high"

    def test_monotone_invariance(self, rng):
        ds = random_panel(rng, (9, 7, 8), T=3, K=2)
        moved = ds.map_values(lambda _, a: np.arctan(a) * 5 + 2)
        scaled = ds.map_values(lambda _, a: a * 7.5)
        base = multi_arm_lrst(ds)
        for other in (moved, scaled):
            res = multi_arm_lrst(other)
            np.testing.assert_array_equal(res.components, base.components)
            assert res.p_value == base.p_value
            assert res.selected_dose == base.selected_dose

    def test_subject_relabeling_invariance(self, rng):
        ds = random_panel(rng, (9, 7, 8), T=2, K=2, ties=True)
        perm = ds.map_values(lambda _, a: a[rng.permutation(a.shape[0])])
        a, b = multi_arm_lrst(ds), multi_arm_lrst(perm)
        np.testing.assert_allclose(a.components, b.components, rtol=1e-12)
        assert a.p_value == pytest.approx(b.p_value, rel=1e-10)

    def test_unknown_method(self, rng):
        with pytest.raises(ValueError):
            multi_arm_lrst(random_panel(rng, (4, 4)), method="exact")


class TestSelection:
    def test_larger_component_selected(self):
        res = multi_arm_lrst(gen_trial(_null(2, 40, seed=13), 0))
        assert select_dose(replace(res, components=np.array([0.86, 5.82]))) == "high"

    def test_tie_goes_to_first_dose(self, rng):
        x, y = rng.normal(size=(6, 2, 1)), rng.normal(size=(5, 2, 1))
        res = multi_arm_lrst(TrialDataset.from_arrays(x, [y, y.copy()]))
        assert res.components[0] == res.components[1]
        assert select_dose(res) == "dose1"


class TestBonferroni:
    def test_moderate_p_values_not_rejected(self):
        b = BonferroniResult({"low": 0.455, "high": 0.201}, 0.05)
        assert b.threshold == 0.025
        assert not b.rejected

    def test_zero_p_rejected(self):
        assert BonferroniResult({"a": 0.0, "b": 0.9}, 0.05).rejected

    def test_single_dose_threshold(self):
        ds = gen_trial(_null(1, 30, seed=14), 0)
        b = bonferroni_univariate(ds, 0.05)
        assert b.threshold == 0.05
        assert b.p_values["dose"] == two_arm_lrst(ds).p_value

    def test_alpha_domain(self, rng):
        with pytest.raises(ValueError):
            bonferroni_univariate(random_panel(rng, (4, 4)), 1.5)


class TestNullCalibration:
    def test_component_variance_n500(self):
        sc = _null(1, 500, seed=21, n_doses=(500,))
        z = np.array([two_arm_lrst(gen_trial(sc, r)).statistic for r in range(2000)])
        assert 0.9 <= z.var(ddof=1) <= 1.1

    def test_component_normal_ks_n2000(self):
        sc = _null(1, 2000, seed=22, n_doses=(2000,))
        z = [two_arm_lrst(gen_trial(sc, r)).statistic for r in range(500)]
        assert stats.kstest(z, "norm").pvalue > 0.01

    def test_a2_p_values_uniform(self):
        sc = _null(2, 150, seed=23)
        p = [multi_arm_lrst(gen_trial(sc, r)).p_value for r in range(400)]
        assert stats.kstest(p, "uniform").pvalue > 0.01
