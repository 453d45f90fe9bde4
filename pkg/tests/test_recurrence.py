import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nuspec.dynamics import CAT_EXPONENT, Point2, Space, apply, orbit_array
from nuspec.errors import PreconditionError
from nuspec.lyapunov import LyapunovSpectrum
from nuspec.recurrence import (
    ReturnTimeSequence,
    SetSpec,
    birkhoff_indicator_average,
    first_return_time_ball,
    interval_hit_check,
    nonlacunarity_profile,
    recurrence_scaling,
    return_times,
)

BOUND_CAT = 2.0 / CAT_EXPONENT  # 1/lambda_u - 1/lambda_s with symmetric spectrum


def torus(x, y):
    return Point2(x, y, Space.TORUS2)


PERIOD3 = torus(0.75, 0.5)  # (A^3 - I) kills (3/4, 1/2); orbit {.., (0,.25), (.25,.25)}


def test_period3_point_is_periodic(cat):
    p = PERIOD3
    for _ in range(3):
        p = apply(cat, p)
    assert (p.x, p.y) == (PERIOD3.x, PERIOD3.y)


def test_return_fixed_point(cat):
    assert first_return_time_ball(cat, torus(0.0, 0.0), 0.1, grid=3, T_max=10) == 1


def test_return_period3_center_proxy(cat):
    tau = first_return_time_ball(cat, PERIOD3, 0.05, grid=1, T_max=50)
    assert tau == 3


def test_return_monotone_in_radius(cat):
    # nested sample sets via a shared master lattice
    rng = np.random.default_rng(17)
    for _ in range(5):
        x = torus(*rng.random(2))
        taus = []
        for r in (0.2, 0.1, 0.05):
            taus.append(
                first_return_time_ball(cat, x, r, grid=7, T_max=3000, master_radius=0.2)
            )
        assert all(t is not None for t in taus)
        assert taus[0] <= taus[1] <= taus[2]


def test_return_never_beats_center(cat):
    rng = np.random.default_rng(23)
    for _ in range(5):
        x = torus(*rng.random(2))
        t_grid = first_return_time_ball(cat, x, 0.08, grid=5, T_max=5000)
        t_center = first_return_time_ball(cat, x, 0.08, grid=1, T_max=5000)
        assert t_grid is not None and t_center is not None
        assert t_grid <= t_center


def test_recurrence_scaling_cat(cat, cat_spectrum):
    x = torus(0.7364, 0.2146)
    radii = [2.0**-e for e in range(4, 15)]
    rep = recurrence_scaling(cat, x, radii, grid=5, T_max=400, spectrum=cat_spectrum)
    assert rep.method == "segment"
    assert not rep.any_censored
    assert abs(rep.limsup_estimate - BOUND_CAT) <= 0.35 * BOUND_CAT
    assert abs(rep.bound - BOUND_CAT) <= 1e-3


def test_bound_arithmetic():
    spec = LyapunovSpectrum.from_exponents((-1.0, 1.0), 1000)
    rep_bound = 1.0 / spec.lambda_u - 1.0 / spec.lambda_s
    assert rep_bound == 2.0


def test_scaling_fixed_point(cat, cat_spectrum):
    rep = recurrence_scaling(
        cat, torus(0.0, 0.0), [2.0**-e for e in range(4, 10)], grid=3, T_max=50, spectrum=cat_spectrum
    )
    assert all(t == 1 for t in rep.tau)
    assert rep.limsup_estimate <= rep.bound


def test_scaling_shift_invariance(cat, cat_spectrum):
    # moving the base point one step along the orbit changes tau(r) by less
    # than the return time of the half-radius ball
    x = torus(0.7364, 0.2146)
    fx = apply(cat, x)
    radii = [2.0**-e for e in range(4, 11)]
    rep_x = recurrence_scaling(cat, x, radii, grid=5, T_max=600, spectrum=cat_spectrum)
    rep_fx = recurrence_scaling(cat, fx, radii, grid=5, T_max=600, spectrum=cat_spectrum)
    for r, t1, t2 in zip(radii, rep_x.tau, rep_fx.tau):
        t_half = first_return_time_ball(cat, x, r / 2, grid=5, T_max=600, method="segment")
        assert abs(t1 - t2) <= t_half


def test_return_times_periodic_orbit(cat):
    gamma = SetSpec.ball(PERIOD3, 0.05)
    seq = return_times(cat, PERIOD3, gamma, count_fwd=5, count_bwd=3, horizon=100)
    assert seq.forward.tolist() == [3, 6, 9, 12, 15]
    assert seq.backward.tolist() == [-3, -6, -9]


def test_return_times_whole_torus(cat):
    x = torus(0.31, 0.62)
    gamma = SetSpec.ball(x, 0.8)  # torus diameter is sqrt(0.5) < 0.8
    seq = return_times(cat, x, gamma, count_fwd=6, count_bwd=4, horizon=50)
    assert seq.forward.tolist() == [1, 2, 3, 4, 5, 6]
    assert seq.backward.tolist() == [-1, -2, -3, -4]


def test_return_times_requires_membership(cat):
    gamma = SetSpec.ball(torus(0.0, 0.0), 0.01)
    with pytest.raises(PreconditionError):
        return_times(cat, torus(0.5, 0.5), gamma, 3, 3, 100)


def test_cocycle_identity(cat):
    x = torus(0.1729, 0.4104)
    gamma = SetSpec.ball(x, 0.12)
    seq = return_times(cat, x, gamma, count_fwd=30, count_bwd=0, horizon=20_000)
    pts = orbit_array(cat, x.x, x.y, n_fwd=int(seq.forward[-1]))
    for i in range(min(10, seq.count_fwd - 1)):
        t_i = int(seq.forward[i])
        shifted = torus(pts[t_i, 0], pts[t_i, 1])
        sub = return_times(cat, shifted, gamma, count_fwd=1, count_bwd=0, horizon=20_000)
        assert int(sub.forward[0]) == int(seq.forward[i + 1]) - t_i


def test_birkhoff_whole_and_empty(cat):
    x = torus(0.2, 0.3)
    assert birkhoff_indicator_average(cat, x, SetSpec.ball(x, 0.8), 500) == 1.0
    assert birkhoff_indicator_average(cat, x, SetSpec.empty(), 500) == 0.0


def test_birkhoff_ball_area(cat):
    # ergodic average of the indicator converges to the ball area; the
    # Monte-Carlo estimate over random points is the independent oracle
    x = torus(0.7, 0.15)
    ball = SetSpec.ball(torus(0.37, 0.52), 0.1)
    avg = birkhoff_indicator_average(cat, x, ball, 1_000_000)
    rng = np.random.default_rng(5)
    mc = ball.membership_rows(rng.random((200_000, 2))).mean()
    area = math.pi * 0.01
    assert abs(avg - area) <= 0.005
    assert abs(mc - area) <= 0.005


def test_birkhoff_matches_return_count(cat):
    x = torus(0.1729, 0.4104)
    gamma = SetSpec.ball(x, 0.15)
    horizon = 5000
    seq = return_times(cat, x, gamma, count_fwd=horizon, count_bwd=0, horizon=horizon)
    avg = birkhoff_indicator_average(cat, x, gamma, horizon)
    # the average counts j=0 (x itself) while returns count t in [1, horizon]
    hits_in_window = int((seq.forward <= horizon - 1).sum())
    assert abs(avg - (hits_in_window + 1) / horizon) <= 1.0 / horizon


def _periodic_sequence(q, count, horizon):
    fwd = np.arange(1, count + 1) * q
    bwd = -np.arange(1, count + 1) * q
    return ReturnTimeSequence(
        center=torus(0, 0), gamma=None, forward=fwd, backward=bwd, horizon=horizon
    )


def test_nonlacunarity_periodic():
    q = 7
    seq = _periodic_sequence(q, 60, horizon=60 * q)
    prof = nonlacunarity_profile(seq, thresholds=(20,))
    expected = (np.arange(2, 61)) / np.arange(1, 60)
    assert np.allclose(prof.ratios_fwd, expected)
    assert prof.tail_deviation[20] <= 0.05 + 1e-12  # sup attained at i=20: 21/20 - 1
    # two-sided diagonal ratios for the symmetric sequence
    assert np.allclose(prof.ratios_two_sided, expected)


def test_tail_deviation_non_increasing(cat):
    x = torus(0.8314, 0.1593)
    gamma = SetSpec.ball(x, 0.15)
    seq = return_times(cat, x, gamma, count_fwd=200, count_bwd=0, horizon=50_000)
    prof = nonlacunarity_profile(seq, thresholds=(10, 20, 50, 100))
    devs = [prof.tail_deviation[i] for i in (10, 20, 50, 100)]
    assert all(d is not None for d in devs)
    assert devs == sorted(devs, reverse=True)


def test_nonlacunarity_cat_ball(cat):
    x = torus(0.2917, 0.6204)
    gamma = SetSpec.ball(x, math.sqrt(0.05 / math.pi))
    seq = return_times(cat, x, gamma, count_fwd=500, count_bwd=5, horizon=100_000)
    assert seq.count_fwd == 500
    prof = nonlacunarity_profile(seq, thresholds=(100,))
    assert prof.tail_deviation[100] <= 0.10


def _hit_oracle(times, horizon, epsilon, N_start):
    times = list(times)
    n_max = int(math.floor((horizon + 1) / (1.0 + epsilon)))
    if n_max < N_start:
        return None
    ok_from = None
    for n in range(N_start, n_max + 1):
        hit = any(n <= t < n * (1.0 + epsilon) for t in times)
        if not hit:
            ok_from = None
        elif ok_from is None:
            ok_from = n
    if ok_from is None:
        return None
    # every n >= ok_from passed; confirm nothing failed after it
    return ok_from if ok_from > N_start else N_start


def test_interval_hit_periodic():
    q, eps = 7, 0.2
    seq = _periodic_sequence(q, 400, horizon=400 * q)
    got = interval_hit_check(seq, eps, N_start=1)
    want = _hit_oracle(seq.forward, seq.horizon, eps, 1)
    assert got == want
    assert abs(got - math.ceil(q / eps)) <= q


def test_interval_hit_whole_space(cat):
    x = torus(0.4, 0.9)
    seq = return_times(cat, x, SetSpec.ball(x, 0.8), count_fwd=300, count_bwd=0, horizon=300)
    assert interval_hit_check(seq, 0.5, N_start=1) == 1


@given(
    st.lists(st.integers(1, 30), min_size=3, max_size=40),
    st.floats(0.05, 1.5),
    st.integers(1, 10),
)
@settings(max_examples=120, deadline=None)
def test_interval_hit_matches_oracle(increments, epsilon, N_start):
    times = np.cumsum(np.asarray(increments, dtype=np.int64))
    horizon = int(times[-1])
    seq = ReturnTimeSequence(
        center=torus(0, 0), gamma=None, forward=times, backward=-times, horizon=horizon
    )
    got = interval_hit_check(seq, epsilon, N_start=N_start)
    want = _hit_oracle(times, horizon, epsilon, N_start)
    assert got == want


def test_interval_hit_vs_nonlacunarity(cat):
    # whenever the ratio tail is below eps/2 from index i0 on, hits exist in
    # every window [n, n(1+eps)) from t_{i0+1} onward
    rng = np.random.default_rng(40)
    eps = 0.2
    checked = 0
    for _ in range(50):
        x = torus(*rng.random(2))
        radius = rng.uniform(0.08, 0.2)
        seq = return_times(cat, x, SetSpec.ball(x, radius), count_fwd=250, count_bwd=0, horizon=120_000)
        if seq.count_fwd < 60:
            continue
        prof = nonlacunarity_profile(seq, thresholds=(40,))
        if prof.tail_deviation[40] is None or prof.tail_deviation[40] >= eps / 2:
            continue
        start = int(seq.forward[40])
        n_max = int(math.floor((seq.horizon + 1) / (1.0 + eps)))
        for n in range(start, n_max + 1):
            idx = int(np.searchsorted(seq.forward, n, side="left"))
            assert idx < seq.count_fwd and seq.forward[idx] < n * (1.0 + eps)
        checked += 1
    assert checked >= 20


def test_block_set_membership(cat):
    from nuspec.lyapunov import PesinBlockParams

    params = PesinBlockParams(lam=0.96, mu=0.96, epsilon=0.096, window=(40, 40, 8))
    gamma = SetSpec.block(cat, params, max_k=3)
    x = torus(0.377, 0.198)
    assert gamma.membership(x)  # uniformly hyperbolic: every point qualifies
    seq = return_times(cat, x, gamma, count_fwd=3, count_bwd=0, horizon=5)
    assert seq.forward.tolist() == [1, 2, 3]
    # an over-claimed contraction rate empties the set
    bad = SetSpec.block(cat, PesinBlockParams(2.0, 0.96, 0.2, (40, 40, 8)), max_k=60)
    assert not bad.membership(x)


def test_radii_validation(cat, cat_spectrum):
    with pytest.raises(ValueError):
        recurrence_scaling(cat, torus(0.1, 0.2), [0.1, 0.2], 3, 50, cat_spectrum)
    with pytest.raises(ValueError):
        recurrence_scaling(cat, torus(0.1, 0.2), [0.1, 1e-8], 3, 50, cat_spectrum)
