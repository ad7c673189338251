import math
import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ks_2samp, poisson

from bbpre import (
    ConfigurationError,
    ConstantMeanMap,
    DegenerateModelError,
    EnvironmentModel,
    ExpMeanMap,
    MatingRule,
    OffspringModel,
    OverflowGuardError,
    analytic_sigma_xi,
    asexual,
    audit_conditions,
    check_approximation,
    check_homogeneity,
    check_lipschitz,
    check_superadditivity,
    derive_stream,
    monogamous,
    noise_components,
    polygamous,
    walk_increment,
    walk_increments,
)
from bbpre.model import _poisson_centered_abs_moment

ALL_RULES = [monogamous(1), monogamous(3), polygamous(), asexual()]


# ---------------------------------------------------------------------------
# environment
# ---------------------------------------------------------------------------


def test_degenerate_environment_is_constant():
    env = EnvironmentModel(std=0.0)
    rng = np.random.default_rng(0)
    assert all(env.sample(rng) == 0.0 for _ in range(20))
    assert np.all(env.sample(rng, size=100) == 0.0)


def test_environment_sample_mean_clt():
    env = EnvironmentModel(std=0.5)
    draws = env.sample(np.random.default_rng(123), size=10**6)
    assert abs(draws.mean()) <= 4.0 * 0.5 / 1e3


def test_equal_seeds_give_identical_streams():
    env = EnvironmentModel(std=0.5)
    a = env.sample(derive_stream(99, 1), size=50)
    b = env.sample(derive_stream(99, 1), size=50)
    assert np.array_equal(a, b)


def test_environment_validation():
    with pytest.raises(ConfigurationError):
        EnvironmentModel(std=-0.1)
    with pytest.raises(ConfigurationError):
        EnvironmentModel(kind="cauchy")


# ---------------------------------------------------------------------------
# offspring totals
# ---------------------------------------------------------------------------


def test_totals_of_zero_pairs_is_zero():
    model = OffspringModel()
    rng = np.random.default_rng(1)
    assert model.sample_totals(0, 1.3, rng) == (0, 0)


def test_totals_mean_at_eta_zero():
    # each component is Poisson(n_pairs) at eta = 0
    model = OffspringModel()
    rng = np.random.default_rng(5)
    n_pairs, reps = 10**6, 100
    fs, ms = zip(*(model.sample_totals(n_pairs, 0.0, rng) for _ in range(reps)))
    se = 1.0 / math.sqrt(n_pairs * reps)
    assert abs(np.mean(fs) / n_pairs - 1.0) <= 4.0 * se
    assert abs(np.mean(ms) / n_pairs - 1.0) <= 4.0 * se


def test_aggregated_totals_match_per_pair_loop():
    # brute-force oracle: sum n_pairs independent Poisson draws per replicate
    model = OffspringModel()
    rng = np.random.default_rng(11)
    n_pairs, reps, eta = 50, 10_000, 0.4
    lam = math.exp(eta)
    aggregated = np.array([model.sample_totals(n_pairs, eta, rng)[0] for _ in range(reps)])
    oracle = np.random.default_rng(12).poisson(lam, size=(reps, n_pairs)).sum(axis=1)
    d = ks_2samp(aggregated, oracle).statistic
    assert d <= 1.628 * math.sqrt(2.0 / reps)  # not rejected at level 0.01


def test_mean_overflow_raises_guard_error():
    model = OffspringModel(mean_f=ExpMeanMap(shift=800.0))
    with pytest.raises(OverflowGuardError):
        model.sample_totals(10, 0.0, np.random.default_rng(2))


def test_large_mean_normal_fallback_is_sane():
    # crossover at 1e12: relative sd ~ 1e-6, draw must stay within 6 sd
    model = OffspringModel()
    rng = np.random.default_rng(3)
    lam = 4e12
    f, _ = model.sample_totals(4, math.log(lam / 4), rng)
    assert abs(f - lam) <= 6.0 * math.sqrt(lam)


def test_deterministic_family():
    model = OffspringModel(kind="deterministic", mean_f=ConstantMeanMap(1.0), mean_m=ConstantMeanMap(2.0))
    rng = np.random.default_rng(4)
    assert model.sample_totals(7, -0.3, rng) == (7, 14)
    assert model.centered_abs_moments(0.0) == (0.0, 0.0)
    bad = OffspringModel(kind="deterministic", mean_f=ConstantMeanMap(1.5), mean_m=ConstantMeanMap(1.0))
    with pytest.raises(ConfigurationError):
        bad.sample_totals(3, 0.0, rng)


# ---------------------------------------------------------------------------
# centered absolute moments
# ---------------------------------------------------------------------------


def test_poisson_second_central_moment_is_the_mean():
    for lam in (0.0, 0.3, 1.0, 17.2):
        assert _poisson_centered_abs_moment(lam, 2.0) == lam


def test_poisson_fractional_moment_against_direct_sum():
    # independent oracle: direct summation with scipy pmf over a wide range
    for lam, order in ((1.7, 1.5), (0.4, 1.25), (9.0, 2.5)):
        k = np.arange(0, 500)
        exact = float(np.sum(np.abs(k - lam) ** order * poisson.pmf(k, lam)))
        assert _poisson_centered_abs_moment(lam, order) == pytest.approx(exact, rel=1e-10)


def test_poisson_fractional_moment_against_monte_carlo():
    lam, order = 2.6, 1.8
    draws = np.random.default_rng(9).poisson(lam, size=2_000_000).astype(float)
    vals = np.abs(draws - lam) ** order
    se = vals.std() / math.sqrt(vals.size)
    assert abs(_poisson_centered_abs_moment(lam, order) - vals.mean()) <= 5 * se


def test_moment_array_path_matches_scalar():
    lams = np.array([0.0, 0.2, 1.0, 3.7, 40.0])
    order = 1.5
    from bbpre.model import _poisson_centered_abs_moment_array

    batch = _poisson_centered_abs_moment_array(lams, order)
    single = [_poisson_centered_abs_moment(float(l), order) for l in lams]
    assert batch == pytest.approx(single, rel=1e-12)


# ---------------------------------------------------------------------------
# mating rules
# ---------------------------------------------------------------------------


def test_mate_examples():
    assert monogamous(1).mate(5, 3, 0.0) == 3
    assert polygamous().mate(7, 0, 0.0) == 0
    assert polygamous().mate(7, 2, 0.0) == 7
    assert asexual().mate(4, 999, 0.0) == 4
    assert monogamous(3).mate(10, 2, 0.0) == 6


def test_approximant_examples():
    assert monogamous(1).approximant(2.5, 4.0, 0.0) == 2.5
    for rule in ALL_RULES:
        assert rule.approximant(0.0, 0.0, 0.7) == 0.0


def test_homogeneity_spot_check():
    rng = np.random.default_rng(21)
    for rule in ALL_RULES:
        for _ in range(50):
            x, y = rng.uniform(0, 50, size=2)
            z = rng.standard_normal()
            assert rule.approximant(3 * x, 3 * y, z) == pytest.approx(3 * rule.approximant(x, y, z), rel=1e-12)


def test_alpha_range_is_validated():
    with pytest.raises(ConfigurationError):
        monogamous(1, alpha=1.0)
    with pytest.raises(ConfigurationError):
        polygamous(alpha=0.0)


def test_monogamous_capacity_must_be_positive_integer():
    for bad in (0, -1, 1.5):
        with pytest.raises(ConfigurationError):
            monogamous(bad)


def test_delta_from_alpha():
    assert monogamous(1, alpha=0.5).delta == pytest.approx(1.0)
    assert monogamous(1, alpha=0.25).delta == pytest.approx(3.0)


def test_rules_and_models_pickle():
    for obj in (*ALL_RULES, OffspringModel(), EnvironmentModel()):
        clone = pickle.loads(pickle.dumps(obj))
        assert clone == obj


# ---------------------------------------------------------------------------
# walk increments
# ---------------------------------------------------------------------------


def test_walk_increment_canonical_identity_is_exact():
    rule, model = monogamous(1), OffspringModel()
    for eta in (-2.0, -0.37, 0.0, 0.3, 1.7, 11.0):
        assert walk_increment(rule, model, eta) == eta
    etas = np.random.default_rng(3).standard_normal(1000)
    assert np.array_equal(walk_increments(rule, model, etas), etas)


def test_walk_increment_examples():
    rule = monogamous(1)
    assert walk_increment(rule, OffspringModel(), 0.0) == 0.0
    assert walk_increment(rule, OffspringModel(), 0.3) == 0.3
    lopsided = OffspringModel(mean_f=ExpMeanMap(), mean_m=ExpMeanMap(scale=1.2))
    for eta in (-1.0, 0.0, 2.2):
        assert walk_increment(rule, lopsided, eta) == eta  # min selects the smaller female mean


def test_walk_increment_degenerate_model():
    dead = OffspringModel(mean_f=ExpMeanMap(scale=0.0), mean_m=ExpMeanMap(scale=0.0))
    with pytest.raises(DegenerateModelError):
        walk_increment(monogamous(1), dead, 0.0)
    with pytest.raises(DegenerateModelError):
        walk_increments(monogamous(1), dead, np.zeros(3))


def test_analytic_sigma_detection():
    env = EnvironmentModel(std=0.4)
    assert analytic_sigma_xi(monogamous(1), env, OffspringModel()) == 0.4
    assert analytic_sigma_xi(asexual(), env, OffspringModel()) == 0.4
    assert analytic_sigma_xi(polygamous(), env, OffspringModel()) == 0.4
    const = OffspringModel(mean_f=ConstantMeanMap(2.0), mean_m=ConstantMeanMap(2.0))
    assert analytic_sigma_xi(monogamous(1), env, const) is None


# ---------------------------------------------------------------------------
# condition checks
# ---------------------------------------------------------------------------


def test_superadditivity_direct_example():
    # min(3+2, 4+1) = 5 >= min(3,4) + min(2,1) = 5
    rule = monogamous(1)
    assert rule.mate(3 + 2, 4 + 1, 0.0) >= rule.mate(3, 4, 0.0) + rule.mate(2, 1, 0.0)


def test_superadditivity_sampled_passes_for_builtins(rng):
    for rule in ALL_RULES:
        check = check_superadditivity(rule, trials=100_000, count_range=50, stream=rng)
        assert check.verdict == "pass", check.witnesses
        assert check.detail["violations"] == 0


def test_superadditivity_finds_broken_rule(rng):
    broken = MatingRule(
        kind="custom",
        L=lambda x, y, z: math.ceil(x / 2),
        g=lambda x, y, z: x / 2.0,
        lipschitz=lambda z: 1.0,
        rho=lambda z: 1.0,
        alpha=0.5,
    )
    check = check_superadditivity(broken, trials=5_000, count_range=5, stream=rng)
    assert check.verdict == "fail"
    assert check.witnesses


def test_exhaustive_superadditivity_small_grid():
    # full enumeration on counts <= 8 at fixed environments (oracle for the sampled check)
    grid = np.arange(9)
    x, y, u, v = np.meshgrid(grid, grid, grid, grid, indexing="ij")
    x, y, u, v = (a.ravel() for a in (x, y, u, v))
    from bbpre import mate_array

    for rule in ALL_RULES:
        for z in (-1.0, 0.0, 2.0):
            lhs = mate_array(rule, x + u, y + v, z)
            rhs = mate_array(rule, x, y, z) + mate_array(rule, u, v, z)
            assert np.all(lhs >= rhs), rule.kind


def test_lipschitz_check_passes_for_builtins(rng):
    for rule in ALL_RULES:
        assert check_lipschitz(rule, trials=20_000, stream=rng).verdict == "pass"


def test_homogeneity_check_passes_for_builtins(rng):
    for rule in ALL_RULES:
        assert check_homogeneity(rule, trials=20_000, stream=rng).verdict == "pass"


def test_approximation_monogamous_and_asexual_have_zero_residual(rng):
    for rule in (monogamous(1), monogamous(4), asexual()):
        check = check_approximation(rule, grid=20_000, stream=rng)
        assert check.verdict == "pass"
        assert check.detail["max_ratio"] == 0.0


def test_approximation_polygamous_witness():
    # at (x, y=0): |L - g| = x, which outgrows rho * x^alpha; reported honestly
    rule = polygamous()
    assert abs(rule.mate(10, 0, 0.0) - rule.approximant(10.0, 0.0, 0.0)) == 10.0
    check = check_approximation(rule, grid=50_000, stream=np.random.default_rng(8))
    assert check.verdict == "fail"
    assert any(w[1] == 0 and w[0] >= 2 for w in check.witnesses)


# hypothesis property checks ---------------------------------------------------

counts = st.integers(min_value=0, max_value=10**6)
reals = st.floats(min_value=0.0, max_value=1e6)
envs = st.floats(min_value=-20.0, max_value=20.0)


@settings(max_examples=200)
@given(x=counts, y=counts, u=counts, v=counts, z=envs)
def test_property_superadditivity(x, y, u, v, z):
    for rule in ALL_RULES:
        assert rule.mate(x + u, y + v, z) >= rule.mate(x, y, z) + rule.mate(u, v, z)


@settings(max_examples=200)
@given(x=reals, y=reals, u=reals, v=reals, z=envs)
def test_property_lipschitz(x, y, u, v, z):
    for rule in ALL_RULES:
        lhs = abs(rule.approximant(x, y, z) - rule.approximant(u, v, z))
        rhs = float(rule.lipschitz(z)) * (abs(x - u) + abs(y - v))
        assert lhs <= rhs + 1e-12 * (1.0 + rhs)


@settings(max_examples=200)
@given(x=reals, y=reals, t=st.floats(min_value=0.0, max_value=10.0), z=envs)
def test_property_homogeneity(x, y, t, z):
    for rule in ALL_RULES:
        tg = t * rule.approximant(x, y, z)
        assert abs(rule.approximant(t * x, t * y, z) - tg) <= 1e-12 * (1.0 + abs(tg))


# ---------------------------------------------------------------------------
# audits
# ---------------------------------------------------------------------------


def test_audit_canonical_model(canonical_env, canonical_offspring, canonical_rule):
    report = audit_conditions(canonical_rule, canonical_env, canonical_offspring, 50_000, derive_stream(404))
    m = report.moment_estimates
    assert abs(m["mean_xi"]) <= 4.0 * m["mean_xi_se"]
    assert abs(m["var_xi"] - 0.25) <= 4.0 * m["var_xi_se"]
    assert report.verdict("C7") == "pass"
    assert report.verdict("C1") == "pass"
    assert report.verdict("C4") == "pass"
    assert report.verdict("C6") == "estimated"


def test_audit_shifted_model_fails_criticality(canonical_env, shifted_offspring, canonical_rule):
    report = audit_conditions(canonical_rule, canonical_env, shifted_offspring, 50_000, derive_stream(405))
    assert report.verdict("C7") == "fail"
    assert report.witnesses("C7")
    assert report.moment_estimates["mean_xi"] == pytest.approx(0.1, abs=0.01)


def test_audit_polygamous_reports_approximation_witness(canonical_env, canonical_offspring):
    report = audit_conditions(polygamous(), canonical_env, canonical_offspring, 10_000, derive_stream(406))
    assert report.verdict("C4") == "fail"
    assert report.witnesses("C4")


def test_omega_components_at_eta_zero(canonical_rule, canonical_offspring):
    w1, w2, w3 = noise_components(canonical_rule, canonical_offspring, 0.0)
    assert w2 == 2.0  # mean_f + mean_m = 1 + 1 exactly
    assert w1 == 2.0  # lipschitz^2 + rho^2 with both scales 1
    assert w3 == 2.0  # two Poisson(1) variances at moment order 2


def test_audit_requires_enough_samples(canonical_env, canonical_offspring, canonical_rule):
    with pytest.raises(ConfigurationError):
        audit_conditions(canonical_rule, canonical_env, canonical_offspring, 50, derive_stream(1))


def test_condition_report_serializes(canonical_env, canonical_offspring, canonical_rule):
    import json

    report = audit_conditions(canonical_rule, canonical_env, canonical_offspring, 1_000, derive_stream(2))
    payload = json.dumps(report.to_dict(), allow_nan=False)
    assert '"C7"' in payload
