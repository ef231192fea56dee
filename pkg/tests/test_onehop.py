import numpy as np
import pytest

from geofwd.bf import bf_decide, solve_bf
from geofwd.errors import ConfigError, DomainError
from geofwd.geometry import HopContext, quantile
from geofwd.netsim.onehop import BLOCK, onehop_outcomes, run_onehop, walk_trial
from geofwd.rng import stream
from geofwd.analytics import sf_mean_delay, sf_mean_progress
from geofwd.sf import SfThreshold, eta_cutoff, solve_alpha


def within(stat_mean, stat_se, ref, k=3.0):
    return abs(stat_mean - ref) <= k * stat_se


@pytest.mark.parametrize("K", [1, 3, 5])
def test_ff_mf_closed_forms(model10, K):
    ctx = HopContext(10.0, K)
    ff = run_onehop("FF", ctx, model10, 200_000, 1)
    mf = run_onehop("MF", ctx, model10, 200_000, 2)
    assert within(ff.mean_delay, ff.se_delay, 1 / (K + 1))
    assert within(mf.mean_delay, mf.se_delay, K / (K + 1))
    assert within(ff.mean_progress, ff.se_progress, model10.mean())
    assert within(mf.mean_progress, mf.se_progress, sf_mean_progress(K, 1.0, model10))
    assert ff.policy == "FF" and ff.trials == 200_000 and ff.J is None


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_sf_matches_analytics(model10, alpha):
    ctx = HopContext(10.0, 5)
    th = SfThreshold(alpha, 5, eta_cutoff(5, model10))
    st = run_onehop(th, ctx, model10, 200_000, 3)
    assert within(st.mean_delay, st.se_delay, sf_mean_delay(5, alpha, model10))
    assert within(st.mean_progress, st.se_progress, sf_mean_progress(5, alpha, model10))
    assert st.alpha == alpha


def _reference(decide, seed, K, n, model, block):
    # block 0 of a run: wakes first, then progress quantiles, from stream (seed, 0)
    rng = stream(seed, 0)
    W = np.sort(rng.random((block, K)), axis=1)
    Z = quantile(model, rng.random((block, K)))
    return [walk_trial(decide, W[i], Z[i]) for i in range(n)], Z[:n]


@pytest.mark.parametrize("which", ["FF", "MF", "SF", "BF"])
def test_vectorized_matches_stagewise_walk(model10, which):
    K, seed = 4, 99
    ctx = HopContext(10.0, K)
    if which == "BF":
        policy = solve_bf(ctx, model10, 2.0, n_w=30, n_b=30)
        decide = lambda k, w, b: bf_decide(policy, k, w, b)  # noqa: E731
    elif which == "SF":
        policy = solve_alpha(K, 2.0, model10)
        decide = lambda k, w, b: b >= policy.alpha  # noqa: E731
    else:
        policy = which
        decide = (lambda k, w, b: True) if which == "FF" else (lambda k, w, b: k == K)
    delay, progress, stage = onehop_outcomes(policy, ctx, model10, 10_000, seed)
    ref, Z = _reference(decide, seed, K, 500, model10, 10_000)
    for i, (k, d, b) in enumerate(ref):
        assert stage[i] == k and delay[i] == d and progress[i] == b
        # single-hop class: the packet goes to the best node woken so far
        assert progress[i] == Z[i, :k].max()
    assert np.all((stage >= 1) & (stage <= K))


def test_jobs_do_not_change_results(model10):
    ctx = HopContext(10.0, 3)
    th = solve_alpha(3, 2.0, model10)
    one = onehop_outcomes(th, ctx, model10, 3 * BLOCK + 17, 5, jobs=1)
    two = onehop_outcomes(th, ctx, model10, 3 * BLOCK + 17, 5, jobs=2)
    for a, b in zip(one, two):
        assert np.array_equal(a, b)
    again = onehop_outcomes(th, ctx, model10, 3 * BLOCK + 17, 5, jobs=1)
    assert np.array_equal(one[0], again[0])
    other = onehop_outcomes(th, ctx, model10, 3 * BLOCK + 17, 6, jobs=1)
    assert not np.array_equal(one[0], other[0])


def test_below_cutoff_sf_is_ff(model10):
    ctx = HopContext(10.0, 5)
    th = solve_alpha(5, 0.5 * eta_cutoff(5, model10), model10)
    sf = onehop_outcomes(th, ctx, model10, 20_000, 8)
    ff = onehop_outcomes("FF", ctx, model10, 20_000, 8)
    assert all(np.array_equal(a, b) for a, b in zip(sf, ff))


def test_lagrangian_reported(model10):
    ctx = HopContext(10.0, 3)
    th = solve_alpha(3, 2.0, model10)
    st = run_onehop(th, ctx, model10, 20_000, 4)
    assert st.eta == 2.0
    assert st.J == pytest.approx(st.mean_delay - 2.0 * st.mean_progress, abs=1e-12)
    assert st.se_J > 0


def test_errors(model10):
    ctx = HopContext(10.0, 3)
    with pytest.raises(DomainError):
        run_onehop("FF", ctx, model10, 100, 0)
    with pytest.raises(DomainError):
        run_onehop("FF", HopContext(10.0, 0), model10, 20_000, 0)
    with pytest.raises(ConfigError):
        run_onehop("XX", ctx, model10, 20_000, 0)
    surf = solve_bf(HopContext(10.0, 4), model10, 1.0, n_w=10, n_b=10)
    with pytest.raises(ConfigError):
        run_onehop(surf, ctx, model10, 20_000, 0)
