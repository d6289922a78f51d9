"""Self-normalization, pivot Monte Carlo, and the decision rules built on them."""

import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import specnorm as sn
from conftest import make_path


def test_self_norm_matches_linear_path_integral():
    # values eta on the grid: D(eta) = eta^3 (eta - 1), and the Riemann sum
    # converges to integral eta^6 (eta - 1)^2 = 1/252
    n = 4000
    eta = np.arange(1, n + 1) / n
    v = sn.self_norm_V([make_path(eta, f_exp=3)])
    direct = np.mean((eta**3 * (eta - 1.0)) ** 2)
    assert v.values[0] ** 2 == pytest.approx(direct, rel=1e-14)
    assert v.values[0] ** 2 == pytest.approx(1.0 / 252.0, rel=1e-4)
    assert v.scalar == v.values[0]


def test_self_norm_small_grid_hand_computed():
    values = np.array([0.5, 0.25, 1.0, 0.0])
    eta = np.arange(1, 5) / 4
    dev = eta**2 * (values - values[-1])
    expected = np.sqrt(np.mean(dev**2))
    v = sn.self_norm_V([make_path(values, f_exp=2)])
    assert v.values[0] == pytest.approx(expected, rel=1e-15)


def test_self_norm_degenerate_and_invalid_paths():
    const = make_path(np.full(64, 0.7))
    assert sn.self_norm_V([const]).values[0] == 0.0
    # invalid fractions contribute nothing
    values = np.linspace(0.2, 0.9, 64)
    half = make_path(values, valid=np.arange(64) >= 32)
    full = sn.self_norm_V([make_path(values)]).values[0]
    masked = sn.self_norm_V([half]).values[0]
    dev = (np.arange(1, 65) / 64) ** 3 * (values - values[-1])
    expected = np.sqrt(np.mean(np.where(np.arange(64) >= 32, dev, 0.0) ** 2))
    assert masked == pytest.approx(expected, rel=1e-14)
    assert masked < full


def test_self_norm_multiple_paths_and_grid_mismatch():
    a = make_path(np.linspace(0.0, 1.0, 32))
    b = make_path(np.linspace(1.0, 0.0, 32), f_exp=2)
    v = sn.self_norm_V([a, b])
    assert v.matrix.shape == (2, 2)
    assert v.matrix[0, 1] == pytest.approx(v.matrix[1, 0])
    with pytest.raises(ValueError, match="fraction grid"):
        sn.self_norm_V([a, make_path(np.zeros(16))])
    with pytest.raises(ValueError, match="at least one"):
        sn.self_norm_V([])
    with pytest.raises(ValueError, match="multi-path"):
        _ = v.scalar


def test_quantile_table_roundtrip_and_cache(tmp_path):
    law = sn.mc_quantiles(3, 2, replications=10_000, bm_steps=500, cache_dir=tmp_path)
    path = sn.pivot_cache_path(3, 2, 10_000, 500, sn.DEFAULT_QUANTILE_SEED, cache_dir=tmp_path)
    assert path.is_file()
    raw = path.read_bytes()
    again = sn.mc_quantiles(3, 2, replications=10_000, bm_steps=500, cache_dir=tmp_path)
    assert np.array_equal(law.quantiles, again.quantiles)
    # saving the reloaded law reproduces the file byte for byte
    loaded = sn.load_pivot_law(path)
    other = tmp_path / "copy.txt"
    sn.save_pivot_law(loaded, other)
    assert other.read_bytes() == raw


def test_corrupt_cache_recomputes_with_warning(tmp_path):
    law = sn.mc_quantiles(3, 2, replications=10_000, bm_steps=500, cache_dir=tmp_path)
    path = sn.pivot_cache_path(3, 2, 10_000, 500, sn.DEFAULT_QUANTILE_SEED, cache_dir=tmp_path)
    path.write_text("garbage\n")
    with pytest.warns(UserWarning, match="unreadable quantile cache"):
        again = sn.mc_quantiles(3, 2, replications=10_000, bm_steps=500, cache_dir=tmp_path)
    assert np.array_equal(law.quantiles, again.quantiles)
    # a table for different parameters in the same slot counts as stale
    stale = sn.PivotLaw(
        f_exponent=3, g_exponent=2, replications=99, bm_steps=500,
        seed=sn.DEFAULT_QUANTILE_SEED, alphas=sn.ALPHA_GRID.copy(),
        quantiles=np.linspace(-1, 1, len(sn.ALPHA_GRID)),
    )
    sn.save_pivot_law(stale, path)
    with pytest.warns(UserWarning, match="stale quantile cache"):
        again = sn.mc_quantiles(3, 2, replications=10_000, bm_steps=500, cache_dir=tmp_path)
    assert np.array_equal(law.quantiles, again.quantiles)


def test_quantiles_independent_of_thread_count():
    one = sn.mc_quantiles(2, 1, replications=12_000, bm_steps=500, threads=1, use_cache=False)
    three = sn.mc_quantiles(2, 1, replications=12_000, bm_steps=500, threads=3, use_cache=False)
    assert np.array_equal(one.quantiles, three.quantiles)


def test_quantile_lookup_interpolates_and_guards_range(small_law):
    grid_val = small_law.quantile(0.05)
    assert grid_val == small_law.quantiles[np.searchsorted(small_law.alphas, 0.05)]
    mid = small_law.quantile(0.0505)
    assert min(small_law.quantile(0.05), small_law.quantile(0.051)) <= mid
    assert mid <= max(small_law.quantile(0.05), small_law.quantile(0.051))
    with pytest.raises(sn.ConfigError, match="outside the tabulated range"):
        small_law.quantile(0.0001)
    se = sn.quantile_se(small_law, 0.05)
    assert 0 < se < 1.0


def test_mc_argument_validation():
    with pytest.raises(sn.ConfigError, match="replications"):
        sn.mc_quantiles(3, 2, replications=100)
    with pytest.raises(sn.ConfigError, match="bm_steps"):
        sn.mc_quantiles(3, 2, bm_steps=10)
    with pytest.raises(sn.ConfigError, match="non-negative"):
        sn.mc_quantiles(-1, 2)
    with pytest.raises(sn.ConfigError, match="threads"):
        sn.mc_quantiles(3, 2, threads=0)


def test_pivot_law_is_roughly_symmetric(law_32):
    med = law_32.quantile(0.5)
    assert abs(med) <= 3.0 * sn.quantile_se(law_32, 0.5)
    lo, hi = law_32.quantile(0.05), law_32.quantile(0.95)
    tol = 2.0 * math.hypot(sn.quantile_se(law_32, 0.05), sn.quantile_se(law_32, 0.95))
    assert abs(lo + hi) <= tol
    assert lo < 0 < hi


def test_confidence_interval_alignment(law_32):
    ci = sn.confidence_interval(0.5, 0.01, law_32, alpha=0.05)
    assert ci.level == pytest.approx(0.95)
    assert ci.lo == pytest.approx(0.5 + law_32.quantile(0.025) * 0.01)
    assert ci.hi == pytest.approx(0.5 + law_32.quantile(0.975) * 0.01)
    assert ci.lo < 0.5 < ci.hi
    degenerate = sn.confidence_interval(0.5, 0.0, law_32, alpha=0.05)
    assert (degenerate.lo, degenerate.hi) == (0.5, 0.5)
    with pytest.raises(sn.ConfigError, match="alpha"):
        sn.confidence_interval(0.5, 0.01, law_32, alpha=0.001)
    with pytest.raises(ValueError, match="non-negative"):
        sn.confidence_interval(0.5, -0.1, law_32)


def test_relevant_test_threshold_rule(law_32):
    q = law_32.quantile(0.95)
    at_threshold = sn.relevant_test(0.1 + q * 0.02, 0.02, law_32, delta=0.1)
    assert not at_threshold.reject  # strict inequality at the boundary
    above = sn.relevant_test(0.1 + q * 0.02 + 1e-9, 0.02, law_32, delta=0.1)
    assert above.reject
    assert above.threshold == pytest.approx(0.1 + q * 0.02)
    with pytest.raises(sn.ConfigError, match="delta"):
        sn.relevant_test(0.5, 0.1, law_32, delta=-0.2)


def test_order_selection_on_synthetic_shares(law_32):
    wiggle = 1e-9 * np.sin(np.linspace(0.0, 3.0, 64))
    paths = [
        make_path(s + wiggle, d=d)
        for d, s in ((1, 0.2), (2, 0.97), (3, 0.99))
    ]
    sel = sn.estimate_dstar(paths, law_32, nu=0.9, alpha=0.05)
    assert sel.d_hat == 2
    assert sel.stats[0].statistic < sel.quantile
    assert sel.stats[1].statistic > sel.quantile
    assert not sn.test_order_upper(sel, 2)
    assert sn.test_order_upper(sel, 1)


def test_order_selection_sentinel_and_degenerate(law_32):
    low = [make_path(np.full(64, s), d=d) for d, s in ((1, 0.1), (2, 0.2))]
    sel = sn.estimate_dstar(low, law_32, nu=0.9, alpha=0.05)
    assert sel.d_hat is None
    assert all(st.statistic == -math.inf for st in sel.stats)
    high = sn.estimate_dstar([make_path(np.full(64, 0.95))], law_32, nu=0.9)
    assert high.d_hat == 1 and high.stats[0].statistic == math.inf
    with pytest.raises(sn.NumericalError, match="zero self-normalizer"):
        sn.estimate_dstar([make_path(np.full(64, 0.9))], law_32, nu=0.9)
    with pytest.raises(ValueError, match="strictly increasing"):
        sn.estimate_dstar([low[1], low[0]], law_32, nu=0.9)
    with pytest.raises(sn.ConfigError, match="nu"):
        sn.estimate_dstar(low, law_32, nu=1.5)


def test_order_lower_one_sided_rule(law_32):
    q = law_32.quantile(0.95)
    path = make_path(np.full(64, 0.97) + 1e-6 * np.linspace(-1, 0, 64))
    v = sn.self_norm_V([path]).values[0]
    res = sn.test_order_lower(path, law_32, nu=0.9, alpha=0.05)
    assert res.reject == (0.97 > 0.9 + q * v)
    assert res.threshold == pytest.approx(0.9 + q * v)


def test_joint_statistic_against_joint_law():
    law = sn.mc_quantiles_joint([(3, 2), (2, 1)], replications=10_000, bm_steps=500, threads=2)
    assert law.quantile(0.95) > 0
    a = make_path(np.linspace(0.4, 0.5, 64))
    b = make_path(0.3 + 0.1 * (np.arange(1, 65) / 64) ** 2, f_exp=2, g_exp=1)
    v = sn.self_norm_V([a, b])
    res = sn.joint_statistic(
        np.array([a.values[-1] - 0.45, b.values[-1] - 0.42]), v, law, alpha=0.05
    )
    assert res.statistic >= 0
    assert res.reject == (res.statistic > res.quantile)
    with pytest.raises(ValueError, match="does not match"):
        sn.joint_statistic(np.zeros(3), v, law)
    singular = sn.SelfNormV(matrix=np.ones((2, 2)), values=np.ones(2))
    with pytest.raises(sn.NumericalError, match="singular"):
        sn.joint_statistic(np.zeros(2), singular, law)
    with pytest.raises(sn.ConfigError, match="at least one"):
        sn.mc_quantiles_joint([])


def test_scalar_law_embeds_in_joint_engine():
    # the same seed drives both engines; a single-pair joint law is the
    # squared scalar pivot, so the 90th joint quantile tracks the scalar tails
    joint = sn.mc_quantiles_joint([(3, 2)], replications=20_000, bm_steps=500, threads=2)
    scalar = sn.mc_quantiles(3, 2, replications=20_000, bm_steps=500, use_cache=False, threads=2)
    q_joint = joint.quantile(0.9)
    lo, hi = scalar.quantile(0.05), scalar.quantile(0.95)
    spread = max(hi**2, lo**2)
    assert q_joint == pytest.approx(spread, rel=0.15)


@settings(max_examples=30, deadline=None)
@given(
    shift=st.floats(-5.0, 5.0, allow_nan=False),
    scale=st.floats(0.1, 10.0, allow_nan=False),
    seed=st.integers(0, 2**31),
)
def test_self_norm_shift_invariance_and_scaling(shift, scale, seed):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(32).cumsum() / 8.0
    base = sn.self_norm_V([make_path(values)]).values[0]
    shifted = sn.self_norm_V([make_path(values + shift)]).values[0]
    scaled = sn.self_norm_V([make_path(values * scale)]).values[0]
    assert shifted == pytest.approx(base, rel=1e-9, abs=1e-12)
    assert scaled == pytest.approx(scale * base, rel=1e-9, abs=1e-12)
