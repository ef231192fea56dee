import dataclasses
import io

import numpy as np
import pytest

from geofwd.bf import (
    bf_decide,
    read_surface_csv,
    solve_bf,
    stage_km1_closed_form,
    write_surface_csv,
)
from geofwd.errors import ConfigError, DomainError, ToleranceError
from geofwd.geometry import HopContext, build_progress_model

from oracles import expected_max_table, stage_km2_bruteforce

# phi_1(w, b) for K=3, L_i=10, eta=2 from oracles.stage_km2_bruteforce (n=2000)
STAGE1_K3 = {
    (0.0, 0.0): 0.30550936410820795,
    (0.1, 0.3): 0.34659537925791,
    (0.5, 0.2): 0.4323656980322007,
    (0.3, 0.6): 0.5295598615402908,
    (0.8, 0.9): 0.8681264464196834,
}


@pytest.fixture(scope="module")
def surf5(ctx10, model10):
    return solve_bf(ctx10, model10, 2.0)


@pytest.fixture(scope="module")
def surf3(model10):
    return solve_bf(HopContext(10.0, 3), model10, 2.0)


def test_shape(surf5):
    assert surf5.phi.shape == (5, 100, 100)
    assert surf5.grid_w[0] == 0 and surf5.grid_w[-1] == 1
    assert np.all(np.isfinite(surf5.phi))


def test_last_stage_is_zero(surf5):
    assert np.all(surf5.stage(5) == 0.0)


def test_stage_km1_against_lens_oracle(surf5):
    g, G = expected_max_table(10.0)
    W, B = np.meshgrid(surf5.grid_w, surf5.grid_b, indexing="ij")
    oracle = np.interp(B, g, G) - (1 - W) / (2 * 2.0)
    assert np.max(np.abs(surf5.stage(4) - oracle)) < 1e-4


def test_stage_km1_closed_form_helper(surf5, model10):
    W, B = np.meshgrid(surf5.grid_w, surf5.grid_b, indexing="ij")
    cf = stage_km1_closed_form(model10, 2.0, W, B)
    assert np.max(np.abs(surf5.stage(4) - cf)) < 1e-6


@pytest.mark.parametrize("state", sorted(STAGE1_K3))
def test_stage_km2_against_bruteforce(surf3, state):
    w, b = state
    assert surf3.value(1, w, b) == pytest.approx(STAGE1_K3[state], abs=1e-3)


def test_stop_at_best_possible_progress(surf5):
    for k in range(1, 6):
        assert bf_decide(surf5, k, 0.3, 1.0)
    assert np.all(bf_decide(surf5, 5, np.linspace(0, 1, 7), np.zeros(7)))


def test_continue_with_no_progress_early(surf5):
    # nothing useful held and most of the period left: waiting pays
    assert not bf_decide(surf5, 1, 0.0, 0.0)


def test_decide_vectorized(surf5):
    w = np.linspace(0, 0.9, 10)
    b = np.linspace(0, 1, 10)
    out = bf_decide(surf5, 2, w, b)
    assert out.shape == (10,)
    assert list(out) == [bf_decide(surf5, 2, wi, bi) for wi, bi in zip(w, b)]


def test_decide_stage_range(surf5):
    with pytest.raises(DomainError):
        bf_decide(surf5, 0, 0.1, 0.1)
    with pytest.raises(DomainError):
        bf_decide(surf5, 6, 0.1, 0.1)


def test_thresholds_monotone(surf5):
    for k in range(1, 5):
        ph = surf5.stage(k)
        # larger held progress never lowers the continuation value
        assert np.all(np.diff(ph, axis=1) >= -1e-9)
        # later in the period the expected gap is shorter, so waiting is worth more
        assert np.all(np.diff(ph, axis=0) >= -1e-9)
    # with more nodes to come the threshold is higher
    for k in range(1, 4):
        assert np.all(surf5.stage(k) >= surf5.stage(k + 1) - 1e-9)


def test_larger_eta_raises_thresholds(ctx10, model10, surf5):
    hi = solve_bf(ctx10, model10, 5.0)
    assert np.all(hi.stage(1) >= surf5.stage(1) - 1e-12)
    assert np.any(hi.stage(1) > surf5.stage(1) + 1e-3)


def test_single_node_surface(model10):
    s = solve_bf(HopContext(10.0, 1), model10, 2.0)
    assert s.phi.shape == (1, 100, 100) and np.all(s.phi == 0)


def test_csv_roundtrip(model10):
    s = solve_bf(HopContext(10.0, 3), model10, 1.5, n_w=12, n_b=9)
    buf = io.StringIO()
    write_surface_csv(s, buf, header=["config: command=solve-bf"])
    text = buf.getvalue()
    assert text.startswith("# config: command=solve-bf\n# K=3\n# eta=1.5\nk,w,b,phi\n")
    assert len(text.strip().splitlines()) == 4 + 3 * 12 * 9
    back = read_surface_csv(text)
    assert back.K == 3 and back.eta == 1.5
    assert np.array_equal(back.phi, s.phi)
    assert np.array_equal(back.grid_w, s.grid_w)


def test_csv_incomplete_grid():
    with pytest.raises(ConfigError):
        read_surface_csv("k,w,b,phi\n1,0.0,0.0,0.1\n1,0.0,1.0,0.2\n1,1.0,0.0,0.3\n")
    with pytest.raises(ConfigError):
        read_surface_csv("# K=1\nk,w,b,phi\n")


def test_bad_inputs(ctx10, model10):
    with pytest.raises(DomainError):
        solve_bf(ctx10, model10, 0.0)
    with pytest.raises(DomainError):
        solve_bf(HopContext(10.0, 0), model10, 1.0)
    with pytest.raises(DomainError):
        solve_bf(ctx10, model10, 1.0, n_w=1)
    with pytest.raises(ConfigError):
        solve_bf(HopContext(5.0, 3), model10, 1.0)


def test_unnormalized_model_rejected(ctx10, model10):
    broken = dataclasses.replace(model10, norm_factor=0.9)
    with pytest.raises(ToleranceError):
        solve_bf(ctx10, broken, 2.0, n_w=10, n_b=10)


def test_other_distance():
    ctx = HopContext(1.5, 4)
    m = build_progress_model(ctx)
    s = solve_bf(ctx, m, 1.0, n_w=40, n_b=40)
    W, B = np.meshgrid(s.grid_w, s.grid_b, indexing="ij")
    g, G = expected_max_table(1.5)
    assert np.max(np.abs(s.stage(3) - (np.interp(B, g, G) - (1 - W) / 2.0))) < 1e-4
