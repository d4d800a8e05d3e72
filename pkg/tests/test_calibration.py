import math
import warnings

import mpmath as mp
import numpy as np
import pytest

from lcfrisk import calibration as cal
from lcfrisk import fixtures as fx
from lcfrisk.field_ops import PlasticityRule, strain_amplitude
from lcfrisk.strain_life import MaterialParams, solve_cmb, solve_cmb_notched

THREE_ROWS = cal.SpecimenProfile.tabulated("n3", [[1.5, 1.9, 2.5], [4.0, 1.3, 1.0], [20.0, 1.0, 0.0]])


@pytest.fixture(scope="module")
def study():
    truth = fx.study_material()
    profiles = fx.study_profiles()
    ds = cal.synthetic_dataset(truth, profiles, fx.study_design(), seed=0, T=fx.STUDY_T)
    return truth, profiles, ds


@pytest.fixture(scope="module")
def study_fit(study):
    truth, profiles, ds = study
    return cal.fit(ds, profiles, fx.STUDY_THETA0, truth)


# --------------------------------------------------------------------------
# profiles and data


def test_profile_validation():
    with pytest.raises(ValueError):
        cal.SpecimenProfile.tabulated("x", [[0.0, 1.0, 0.0]])
    with pytest.raises(ValueError):
        cal.SpecimenProfile.tabulated("x", [[1.0, 1.0, -0.1]])
    with pytest.raises(ValueError):
        cal.SpecimenProfile("x", "cone", ((1.0, 1.0, 0.0),))
    u = cal.SpecimenProfile.uniform("u", 25.0)
    assert u.rows == ((25.0, 1.0, 0.0),) and not u.has_gradient and THREE_ROWS.has_gradient


def test_profiles_json_round_trip(tmp_path):
    profiles = {**fx.study_profiles(), "n3": THREE_ROWS}
    p = tmp_path / "p.json"
    p.write_text(cal.profiles_to_json(profiles))
    assert cal.read_profiles(p) == profiles


def test_dataset_csv_round_trip(tmp_path, study):
    _, _, ds = study
    p = tmp_path / "d.csv"
    p.write_text(ds.to_csv())
    back = cal.read_dataset(p)
    assert back.profile_id == ds.profile_id
    np.testing.assert_array_equal(back.n_obs, ds.n_obs)
    np.testing.assert_array_equal(back.censored, ds.censored)


@pytest.mark.parametrize("text,match", [
    ("id,eps,T,n,c\n", "header"),
    ("profile_id,eps_a,temp_C,n_obs,censored\nsmooth,0.01,850,100,2\n", ":2:"),
    ("profile_id,eps_a,temp_C,n_obs,censored\nsmooth,abc,850,100,0\n", ":2:"),
    ("profile_id,eps_a,temp_C,n_obs,censored\n", "no records"),
])
def test_dataset_errors(tmp_path, text, match):
    p = tmp_path / "d.csv"
    p.write_text(text)
    with pytest.raises(ValueError, match=match):
        cal.read_dataset(p)


def test_missing_profile_named(study):
    _, profiles, ds = study
    with pytest.raises(KeyError, match="notch"):
        ds.check_profiles({"smooth": profiles["smooth"]})


def test_nonpositive_life_rejected():
    with pytest.raises(ValueError):
        cal.FatigueDataset.from_records([("s", 0.01, 850.0, 0.0, 0)])


# --------------------------------------------------------------------------
# specimen eta and E-N curves


def test_uniform_unit_area_eta_is_life():
    mat = fx.study_material()
    N = float(solve_cmb(0.004, mat).N)
    assert cal.specimen_eta(cal.SpecimenProfile.uniform("u", 1.0), 0.004, 850.0, mat) == pytest.approx(N, rel=1e-15)


def test_uniform_area_scaling():
    mat = fx.study_material(m=2.0)
    N = float(solve_cmb(0.004, mat).N)
    assert cal.specimen_eta(cal.SpecimenProfile.uniform("u", 100.0), 0.004, 850.0, mat) == pytest.approx(
        N / 10, rel=1e-14)


def test_tabulated_eta_hand_rolled():
    mat = fx.study_material()
    eps = 0.0035
    parts = []
    for dA, kappa, chi in THREE_ROWS.rows:
        N = float(solve_cmb_notched(kappa * eps, chi, mat).N)
        parts.append(dA * N ** -mat.m)
    ref = math.fsum(parts) ** (-1 / mat.m)
    assert abs(cal.specimen_eta(THREE_ROWS, eps, 850.0, mat) / ref - 1) <= 1e-12


def test_kernel_eta_matches_reference(study):
    truth, profiles, ds = study
    lik = cal.Likelihood(ds, profiles, truth)
    ref = np.array([cal.specimen_eta(profiles[p], e, 850.0, truth) for p, e in zip(ds.profile_id, ds.eps_a)])
    np.testing.assert_allclose(lik.record_eta(truth.theta), ref, rtol=1e-12)


def test_all_capped_profile_warns():
    mat = fx.study_material()
    with pytest.warns(UserWarning, match="capped"):
        cal.specimen_eta(cal.SpecimenProfile.uniform("u", 1.0), 1e-9, 850.0, mat)


def test_en_curve_unit_area_at_scale_quantile():
    mat = fx.study_material()
    grid = np.geomspace(0.002, 0.01, 7)
    curve = cal.en_curve(mat, cal.SpecimenProfile.uniform("u", 1.0), 1 - math.exp(-1), grid, 850.0)
    np.testing.assert_allclose(curve, solve_cmb(grid, mat).N, rtol=1e-13)


def test_en_curve_median_closed_form():
    mat = fx.study_material()
    grid = np.geomspace(0.002, 0.01, 7)
    curve = cal.en_curve(mat, cal.SpecimenProfile.uniform("u", 40.0), 0.5, grid, 850.0)
    expected = solve_cmb(grid, mat).N * math.log(2) ** (1 / mat.m) * 40.0 ** (-1 / mat.m)
    np.testing.assert_allclose(curve, expected, rtol=1e-13)


def test_en_curve_tabulated_brute_force():
    mat = fx.study_material()
    grid = np.geomspace(0.0015, 0.008, 9)
    curve = cal.en_curve(mat, THREE_ROWS, 0.5, grid, 850.0)
    for e, n in zip(grid, curve):
        total = math.fsum(dA * float(solve_cmb_notched(k * e, chi, mat).N) ** -mat.m for dA, k, chi in THREE_ROWS.rows)
        assert abs(n / (total ** (-1 / mat.m) * math.log(2) ** (1 / mat.m)) - 1) <= 1e-12


def test_curve_evaluator_matches_en_curve(study):
    truth, profiles, _ = study
    grids = fx.study_grids(9)
    fast = cal.CurveEvaluator(profiles, grids, truth, 850.0)(truth.theta, 0.3)
    for pid, g in grids.items():
        np.testing.assert_allclose(fast[pid], cal.en_curve(truth, profiles[pid], 0.3, g, 850.0), rtol=1e-12)


def test_en_curve_bad_quantile():
    with pytest.raises(ValueError):
        cal.en_curve(fx.study_material(), THREE_ROWS, 1.0, [0.01])


def test_local_strain_neuber_identity_and_growth():
    rule = PlasticityRule("neuber", K_prime=1100.0, n_prime=0.12)
    E = 150000.0
    assert cal.local_strain(0.004, 1.0, E, rule) == pytest.approx(0.004, rel=1e-12)
    eps2 = float(cal.local_strain(0.004, 2.0, E, rule))
    assert eps2 > 2 * 0.004
    from lcfrisk.field_ops import nominal_stress
    s_nom = nominal_stress(0.004, E, rule)
    sigma_e = 2 * math.sqrt(E * s_nom * 0.004)
    assert eps2 == pytest.approx(strain_amplitude(sigma_e, E, rule), rel=1e-15)
    # elastic limit: linear scaling
    assert cal.local_strain(0.004, 2.0, E, None) == 0.008


# --------------------------------------------------------------------------
# likelihood


def _one(n, censored=False, area=1.0):
    ds = cal.FatigueDataset.from_records([("u", 0.005, 850.0, n, censored)])
    return ds, {"u": cal.SpecimenProfile.uniform("u", area)}


def test_nll_exponential_at_scale():
    mat = fx.study_material(m=1.0)
    eta = float(solve_cmb(0.005, mat).N)
    ds, prof = _one(eta)
    assert cal.neg_log_likelihood(mat.theta, ds, prof, mat) == pytest.approx(1 + math.log(eta), rel=1e-12)


def test_nll_censored_survival():
    mat = fx.study_material()
    eta = float(solve_cmb(0.005, mat).N) * 3.0 ** (-1 / mat.m)
    ds, prof = _one(0.7 * eta, censored=True, area=3.0)
    assert cal.neg_log_likelihood(mat.theta, ds, prof, mat) == pytest.approx(0.7**mat.m, rel=1e-11)


def test_nll_extended_precision(study):
    truth, profiles, ds = study
    idx = list(range(0, 100, 10))
    sub = cal.FatigueDataset(tuple(ds.profile_id[i] for i in idx), ds.eps_a[idx], ds.temperature[idx],
                             ds.n_obs[idx], np.array([i % 20 == 0 for i in idx]))
    theta = (1750.0, -0.092, 0.31, -0.62, 0.35, 0.9, 2.6)
    mat = truth.with_theta(theta)
    got = cal.neg_log_likelihood(theta, sub, profiles, mat)
    with mp.workdps(40):
        m = mp.mpf(theta[6])
        total = mp.mpf(0)
        for pid, e, n, c in zip(sub.profile_id, sub.eps_a, sub.n_obs, sub.censored):
            H = mp.fsum(mp.mpf(dA) * mp.power(mp.mpf(float(solve_cmb_notched(k * e, chi, mat).N)), -m)
                        for dA, k, chi in profiles[pid].rows)
            cum = mp.power(n, m) * H
            total += cum if c else -mp.log(m) - mp.log(H) - (m - 1) * mp.log(n) + cum
    assert abs(got / float(total) - 1) <= 1e-10


@pytest.mark.parametrize("bad", [(1800, 0.1, 0.3, -0.6, 0.4, 0.8, 3), (1800, -0.1, 0.3, -0.6, -0.1, 0.8, 3),
                                 (1800, -0.1, 0.3, -0.6, 0.4, 0.0, 3), (1800, -0.1, 0.3, -0.6, 0.4, 0.8, 0),
                                 (-1, -0.1, 0.3, -0.6, 0.4, 0.8, 3)])
def test_nll_out_of_bounds_is_inf(study, bad):
    truth, profiles, ds = study
    assert cal.neg_log_likelihood(bad, ds, profiles, truth) == math.inf


def test_mixed_temperatures_rejected():
    ds = cal.FatigueDataset.from_records([("u", 0.005, 850.0, 1e4, 0), ("u", 0.005, 900.0, 1e4, 0)])
    with pytest.raises(ValueError, match="temperature"):
        cal.Likelihood(ds, {"u": cal.SpecimenProfile.uniform("u", 1.0)}, fx.study_material())


def test_likelihood_consistency_majority(study):
    """The true parameters beat +-20% perturbations on most simulated datasets."""
    truth, profiles, ds = study
    lik = cal.Likelihood(ds, profiles, truth)
    theta = np.array(truth.theta)
    eta = lik.record_eta(theta)
    rng = np.random.default_rng(11)
    perturbations = []
    for _ in range(20):
        p = theta.copy()
        i = rng.integers(7)
        p[i] *= rng.choice([0.8, 1.2])
        perturbations.append(p)
    wins = np.zeros(20, int)
    for r in range(50):
        n, c = cal.simulate_lives(np.random.default_rng([5, r]), eta, truth.m)
        lik.set_lives(n, c)
        base = lik(theta)
        wins += np.array([base <= lik(p) for p in perturbations])
    assert np.all(wins > 25)


# --------------------------------------------------------------------------
# Nelder-Mead


def test_nm_quadratic_bowl():
    res = cal.nelder_mead(lambda x: float(np.sum((x - 3.0) ** 2)), np.zeros(4))
    assert res.converged
    np.testing.assert_allclose(res.x, 3.0, atol=1e-6)


def test_nm_rosenbrock():
    from scipy.optimize import minimize

    def rosen(x):
        return float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)

    res = cal.nelder_mead(rosen, [-1.2, 1.0])
    ref = minimize(rosen, [-1.2, 1.0], method="Nelder-Mead", options=dict(xatol=1e-10, fatol=1e-12))
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-4)
    np.testing.assert_allclose(res.x, ref.x, atol=1e-4)


def test_nm_penalty_wall():
    def f(x):
        return math.inf if x[0] < 1.0 else float((x[0] - 0.5) ** 2 + x[1] ** 2)

    res = cal.nelder_mead(f, [2.0, 1.0])
    assert math.isfinite(res.fun) and res.x[0] >= 1.0
    assert res.x[0] == pytest.approx(1.0, abs=1e-6)


def test_nm_deterministic_and_monotone():
    def f(x):
        return float(np.sum(np.cos(x) + 0.1 * x**2))

    a, b = cal.nelder_mead(f, [1.0, 2.0, -0.5]), cal.nelder_mead(f, [1.0, 2.0, -0.5])
    np.testing.assert_array_equal(a.x, b.x)
    assert a.fun <= a.initial_values.min()


def test_nm_max_iter_flagged():
    res = cal.nelder_mead(lambda x: float(np.sum(x**2)), np.ones(5), cal.SimplexOptions(max_iter=3))
    assert not res.converged and res.iterations == 3


def test_nm_infinite_start():
    with pytest.raises(ValueError):
        cal.nelder_mead(lambda x: math.inf, [1.0])


# --------------------------------------------------------------------------
# fitting


def test_tight_scatter_recovers_curve_parameters():
    mat = fx.study_material(m=40.0)
    profiles = fx.study_profiles()
    design = ([("smooth", float(e)) for e in np.geomspace(0.002, 0.02, 10) for _ in range(3)]
              + [("notch", float(e)) for e in np.geomspace(0.0015, 0.01, 10) for _ in range(3)])
    ds = cal.synthetic_dataset(mat, profiles, design, seed=3)
    res = cal.fit(ds, profiles, (1500.0, -0.08, 0.5, -0.6, 0.3, 0.7, 20.0), mat)
    assert res.converged
    err = np.abs(np.array(res.theta[:4]) / np.array(mat.theta[:4]) - 1)
    assert np.all(err <= 0.02), err


def test_smooth_only_identifiability_warning():
    mat = fx.study_material()
    profiles = {"smooth": fx.study_profiles()["smooth"]}
    ds = cal.synthetic_dataset(mat, profiles, [("smooth", float(e)) for e in np.geomspace(0.003, 0.012, 20)], seed=2)
    with pytest.warns(cal.IdentifiabilityWarning):
        res = cal.fit(ds, profiles, fx.STUDY_THETA0, mat, starts=2)
    assert res.free == (0, 1, 2, 3, 6)
    assert res.theta[4] == fx.STUDY_THETA0[4] and res.theta[5] == fx.STUDY_THETA0[5]
    lik = cal.Likelihood(ds, profiles, mat)
    t2 = np.array(res.theta)
    t2[4] *= 3
    assert lik(t2) == lik(res.theta)


def test_reparametrization_invariance():
    mat = fx.study_material(m=40.0)
    profiles = {"smooth": fx.study_profiles()["smooth"]}
    design = [("smooth", float(e)) for e in np.geomspace(0.002, 0.02, 10) for _ in range(3)]
    ds = cal.synthetic_dataset(mat, profiles, design, seed=4)
    theta0 = np.array(mat.theta)
    free = (0, 1, 2, 3, 6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", cal.IdentifiabilityWarning)
        transformed = cal.fit(ds, profiles, theta0, mat, starts=1).theta
    lik = cal.Likelihood(ds, profiles, mat)

    def raw(x):
        th = theta0.copy()
        th[list(free)] = x
        th[[0, 2]] = np.maximum(th[[0, 2]], 0.0)
        th[6] = max(th[6], 1e-12)
        return lik(th)

    x = theta0[list(free)]
    for _ in range(3):  # restarts polish the raw-coordinate simplex
        x = cal.nelder_mead(raw, x).x
    np.testing.assert_allclose(x, transformed[list(free)], rtol=1e-6)


def test_fit_not_worse_than_start(study, study_fit):
    truth, profiles, ds = study
    lik = cal.Likelihood(ds, profiles, truth)
    assert study_fit.nll <= lik(fx.STUDY_THETA0)
    assert study_fit.converged


def test_fit_median_mid_strain(study, study_fit):
    truth, profiles, _ = study
    for pid, (lo, hi) in fx.STUDY_LEVELS.items():
        mid = [math.sqrt(lo * hi)]
        true = cal.en_curve(truth, profiles[pid], 0.5, mid, 850.0)
        got = cal.en_curve(study_fit.material(truth), profiles[pid], 0.5, mid, 850.0)
        assert abs(got[0] / true[0] - 1) <= 0.10


def test_fit_requires_uncensored():
    ds = cal.FatigueDataset.from_records([("u", 0.005, 850.0, 1e4, 1)])
    with pytest.raises(ValueError, match="uncensored"):
        cal.fit(ds, {"u": cal.SpecimenProfile.uniform("u", 1.0)}, fx.STUDY_THETA0, fx.study_material())


def test_fit_all_starts_fail_carries_theta(study):
    truth, profiles, ds = study
    with pytest.raises(cal.CalibrationError) as info:
        cal.fit(ds, profiles, fx.STUDY_THETA0, truth, starts=2, options=cal.SimplexOptions(max_iter=5))
    assert info.value.result is not None and len(info.value.result.theta) == 7


def test_censored_runouts_fit(study):
    truth, profiles, _ = study
    ds = cal.synthetic_dataset(truth, profiles, fx.study_design(), seed=0, censor_at=2e6)
    assert ds.censored.any()
    res = cal.fit(ds, profiles, fx.STUDY_THETA0, truth, starts=2)
    assert res.converged and np.all(ds.n_obs <= 2e6)


# --------------------------------------------------------------------------
# bootstrap


@pytest.fixture(scope="module")
def small_boot(study, study_fit):
    truth, profiles, ds = study
    return cal.bootstrap(ds, profiles, study_fit, truth, B=100, seed=3, grids=fx.study_grids(11), export=20)


def test_bootstrap_shapes(small_boot):
    b = small_boot
    assert b.replicates == 100 and b.failures <= 10
    for pid in b.grids:
        assert b.curves[pid].shape == (20, 11)
        assert np.all(b.lower[pid] <= b.center[pid]) and np.all(b.center[pid] <= b.upper[pid])
    pp = b.parameter_percentiles()
    assert set(pp) == set(cal.THETA_NAMES)


def test_bootstrap_deterministic(study, study_fit, small_boot):
    truth, profiles, ds = study
    again = cal.bootstrap(ds, profiles, study_fit, truth, B=100, seed=3, grids=fx.study_grids(11), export=20)
    for pid in again.grids:
        assert again.band_csv(pid) == small_boot.band_csv(pid)
        assert again.curves_csv(pid) == small_boot.curves_csv(pid)


def test_bootstrap_ci_zero_collapses(study, study_fit):
    truth, profiles, ds = study
    b = cal.bootstrap(ds, profiles, study_fit, truth, B=100, ci_level=0.0, seed=3, grids=fx.study_grids(5))
    for pid in b.grids:
        np.testing.assert_array_equal(b.lower[pid], b.center[pid])
        np.testing.assert_array_equal(b.upper[pid], b.center[pid])


@pytest.mark.parametrize("kw", [dict(B=50), dict(ci_level=1.0), dict(ci_level=-0.1)])
def test_bootstrap_argument_checks(study, study_fit, kw):
    truth, profiles, ds = study
    with pytest.raises(ValueError):
        cal.bootstrap(ds, profiles, study_fit, truth, **kw)


def test_simulate_lives_censoring():
    rng = np.random.default_rng(0)
    n, c = cal.simulate_lives(rng, np.full(1000, 100.0), 2.0, np.full(1000, 80.0))
    assert np.all(n <= 80.0) and np.all(n[c] == 80.0) and 0 < c.sum() < 1000


def test_material_from_fit(study_fit):
    mat = study_fit.material(fx.study_material())
    assert isinstance(mat, MaterialParams) and mat.theta == tuple(map(float, study_fit.theta))


def test_kernel_eta_with_neuber_profiles(study):
    _, profiles, ds = study
    mat = fx.study_material(K_prime=1100.0, n_prime=0.12, plasticity_rule="neuber")
    lik = cal.Likelihood(ds, profiles, mat)
    assert lik.plasticity.rule == "neuber"
    ref = np.array([cal.specimen_eta(profiles[p], e, 850.0, mat, lik.plasticity)
                    for p, e in zip(ds.profile_id, ds.eps_a)])
    np.testing.assert_allclose(lik.record_eta(mat.theta), ref, rtol=1e-12)
    elastic = cal.Likelihood(ds, profiles, fx.study_material()).record_eta(mat.theta)
    assert np.all(lik.record_eta(mat.theta) <= elastic)
