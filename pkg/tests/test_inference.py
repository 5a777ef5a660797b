import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surrhet.data import Dataset
from surrhet.estimator import fit_tlearner
from surrhet.inference import (
    BootstrapDistribution,
    bh_adjust,
    bootstrap_pte,
    confusion_metrics,
    identify,
    percentile_ci,
)
from surrhet.learners import GamParams, LearnerSpec
from surrhet.learners.gam import fit_gam
from surrhet.simulation import generate

LINEAR = LearnerSpec(family="linear")


def _dist(r_s, valid=None):
    r_s = np.asarray(r_s, dtype=np.float64)
    valid = np.ones_like(r_s, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    return BootstrapDistribution(
        delta=r_s.copy(), delta_s=r_s.copy(), r_s=r_s, valid=valid, frozen={}, redraws=0
    )


@pytest.fixture(scope="module")
def small_bootstrap():
    train = generate(1, np.random.default_rng(1), n=400)
    model = fit_tlearner(train, LINEAR)
    test_x = train.x[:25]
    dist = bootstrap_pte(
        train, test_x, LINEAR, model.frozen, B=30, rng=np.random.default_rng(9)
    )
    return train, model, test_x, dist


def test_bootstrap_shapes(small_bootstrap):
    _, _, test_x, dist = small_bootstrap
    assert dist.r_s.shape == (30, 25)
    assert dist.delta.shape == dist.delta_s.shape == dist.valid.shape == (30, 25)
    assert dist.num_replicates == 30


def test_bootstrap_deterministic_across_worker_counts(small_bootstrap):
    # oracle: the serial run is the reference execution
    train, model, test_x, serial = small_bootstrap
    parallel = bootstrap_pte(
        train, test_x, LINEAR, model.frozen, B=30, rng=np.random.default_rng(9), workers=2
    )
    for name in ("delta", "delta_s", "r_s"):
        assert np.array_equal(getattr(serial, name), getattr(parallel, name), equal_nan=True)
    assert np.array_equal(serial.valid, parallel.valid)


def test_bootstrap_b1_interval_degenerates():
    train = generate(1, np.random.default_rng(2), n=300)
    model = fit_tlearner(train, LINEAR)
    dist = bootstrap_pte(
        train, train.x[:10], LINEAR, model.frozen, B=1, rng=np.random.default_rng(3)
    )
    cis = percentile_ci(dist, alpha=0.05)
    assert np.array_equal(cis["r_s"].lower, dist.r_s[0])
    assert np.array_equal(cis["r_s"].upper, dist.r_s[0])


def test_bootstrap_rejects_bad_b(small_bootstrap):
    train, model, test_x, _ = small_bootstrap
    with pytest.raises(ValueError):
        bootstrap_pte(train, test_x, LINEAR, model.frozen, B=0, rng=np.random.default_rng(0))


@pytest.mark.filterwarnings("ignore:rank-deficient")
def test_bootstrap_redraws_on_empty_group():
    # 4 treated rows in 24: under this seed one resample loses the treated
    # arm entirely and gets redrawn; tiny-but-nonempty arms are not redrawn
    rng = np.random.default_rng(6)
    n = 24
    g = np.zeros(n, dtype=int)
    g[[3, 9, 15, 21]] = 1
    x = rng.standard_normal((n, 1))
    s = x[:, 0] + rng.standard_normal(n)
    y = g + s + rng.standard_normal(n)
    train = Dataset(y=y, s=s, g=g, x=x, column_names=("x1",))
    model = fit_tlearner(train, LINEAR)
    dist = bootstrap_pte(
        train, x[:5], LINEAR, model.frozen, B=3, rng=np.random.default_rng(112)
    )
    assert dist.num_replicates == 3
    assert dist.redraws == 1
    # every kept replicate had both arms, so estimates are finite
    assert np.isfinite(dist.delta).all()


def test_frozen_gam_lambda_is_respected():
    rng = np.random.default_rng(8)
    x = rng.uniform(0, 3, (300, 2))
    y = np.sin(2 * x[:, 0]) + 0.2 * rng.standard_normal(300)
    selected = fit_gam(x, y, GamParams())
    pinned = fit_gam(x, y, GamParams(), lam=1e4)
    assert selected.lam != 1e4
    assert pinned.lam == 1e4


def test_percentile_ci_matches_hand_computed_order_statistics():
    # replicates 1..200 per row; linear interpolation between order stats
    B = 200
    reps = np.tile(np.arange(1.0, B + 1).reshape(-1, 1), (1, 3))
    cis = percentile_ci(_dist(reps), alpha=0.05)
    # oracle: sorted values v_1..v_B, quantile q -> v_k + frac*(v_{k+1}-v_k)
    # with position 1 + q*(B-1)
    assert np.allclose(cis["r_s"].lower, 1 + 0.025 * 199)
    assert np.allclose(cis["r_s"].upper, 1 + 0.975 * 199)
    assert np.all(cis["r_s"].n_valid == 200)


def test_percentile_ci_constant_replicates():
    reps = np.full((50, 4), 3.25)
    cis = percentile_ci(_dist(reps), alpha=0.1)
    assert np.all(cis["r_s"].lower == 3.25)
    assert np.all(cis["r_s"].upper == 3.25)


def test_percentile_ci_alpha_half_ordering(rng):
    reps = rng.standard_normal((101, 6))
    cis = percentile_ci(_dist(reps), alpha=0.5)
    med = np.median(reps, axis=0)
    assert np.all(cis["r_s"].lower <= med + 1e-12)
    assert np.all(med <= cis["r_s"].upper + 1e-12)


def test_percentile_ci_flags_and_undefined():
    reps = np.arange(20.0).reshape(-1, 1) * np.ones((1, 3))
    valid = np.ones((20, 3), dtype=bool)
    valid[:, 1] = False            # no valid replicates
    valid[8:, 2] = False           # fewer than half valid
    cis = percentile_ci(_dist(reps, valid), alpha=0.05)
    assert np.isnan(cis["r_s"].lower[1]) and np.isnan(cis["r_s"].upper[1])
    assert not cis["r_s"].low_support[0]
    assert cis["r_s"].low_support[1]
    assert cis["r_s"].low_support[2]


def test_percentile_ci_alpha_domain():
    with pytest.raises(ValueError):
        percentile_ci(_dist(np.ones((5, 2))), alpha=0.0)
    with pytest.raises(ValueError):
        percentile_ci(_dist(np.ones((5, 2))), alpha=1.0)


def test_identify_forced_cases():
    reps = np.column_stack([np.full(40, 0.9), np.full(40, 0.1)])
    res = identify(_dist(reps), kappa=0.5, alpha=0.05)
    assert res.p_raw[0] == 0.0 and res.strong[0]
    assert res.p_raw[1] == 1.0 and not res.strong[1]


def test_identify_excludes_rows_without_replicates():
    reps = np.full((30, 2), 0.9)
    valid = np.ones((30, 2), dtype=bool)
    valid[:, 1] = False
    res = identify(_dist(reps, valid), kappa=0.5, alpha=0.05)
    assert np.isnan(res.p_raw[1]) and np.isnan(res.p_adjusted[1])
    assert not res.strong[1]
    assert res.strong[0]


def test_identify_p_raw_monotone_in_kappa(rng):
    reps = rng.uniform(0, 1, (60, 8))
    dist = _dist(reps)
    kappas = np.linspace(0.05, 0.95, 10)
    p_by_kappa = np.array([identify(dist, k, 0.05).p_raw for k in kappas])
    assert np.all(np.diff(p_by_kappa, axis=0) >= 0)


def test_identify_invariant_to_replicate_order(rng):
    reps = rng.uniform(0, 1, (80, 5))
    shuffled = reps[rng.permutation(80)]
    a = identify(_dist(reps), kappa=0.5, alpha=0.05)
    b = identify(_dist(shuffled), kappa=0.5, alpha=0.05)
    assert np.array_equal(a.p_raw, b.p_raw)


def test_bh_single_p_unchanged():
    assert np.array_equal(bh_adjust([0.03]), [0.03])


def test_bh_hand_example():
    assert np.allclose(bh_adjust([0.01, 0.02, 0.04]), [0.03, 0.03, 0.04])


def test_bh_ties_all_equal():
    p = np.full(7, 0.2)
    assert np.allclose(bh_adjust(p), p)


def test_bh_domain_check():
    with pytest.raises(ValueError):
        bh_adjust([0.5, 1.2])
    with pytest.raises(ValueError):
        bh_adjust([-0.1])


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=1, max_size=40)
)
def test_bh_properties(p_list):
    p = np.array(p_list)
    adj = bh_adjust(p)
    assert np.all(adj >= p - 1e-15)
    assert np.all(adj <= 1.0)
    order = np.argsort(p, kind="stable")
    assert np.all(np.diff(adj[order]) >= -1e-15)  # monotone in the raw values


def test_confusion_perfect_classifier():
    truth = np.array([True, False, True, False])
    m = confusion_metrics(truth, truth)
    assert (m.ppv, m.npv, m.specificity, m.sensitivity) == (1.0, 1.0, 1.0, 1.0)


def test_confusion_no_positive_decisions():
    decisions = np.zeros(6, dtype=bool)
    truth = np.array([True, True, False, False, False, True])
    m = confusion_metrics(decisions, truth)
    assert m.ppv is None
    assert m.sensitivity == 0.0
    assert m.npv == 0.5
    assert m.specificity == 1.0


def test_confusion_length_mismatch():
    with pytest.raises(ValueError):
        confusion_metrics([True], [True, False])
