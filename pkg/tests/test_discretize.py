from __future__ import annotations

import math

import numpy as np
import pytest

from gssm import (
    Action,
    EventStream,
    HippoConfig,
    LaplacianKind,
    MixMechanism,
    MutationSchedule,
    discrete_step,
    integrate_hippo,
    mixed_estimate,
    segment_weights,
    zoh_oracle_step,
)


def _blank_schedule(t_start, t_end, mutation_times, num_nodes=2):
    count = len(mutation_times) + 1
    adj = np.zeros((num_nodes, num_nodes), dtype=bool)
    return MutationSchedule(
        t_start=t_start,
        t_end=t_end,
        mutation_times=tuple(mutation_times),
        adjacencies=(adj,) * count,
        features=(np.zeros(num_nodes),) * count,
    )


def _random_schedule(rng, num_nodes=6, num_mutations=3, t_start=0.3, t_end=3.3):
    pairs = [(u, v) for u in range(num_nodes) for v in range(u + 1, num_nodes)]
    initial = frozenset(p for p in pairs if rng.random() < 0.4)
    times = np.sort(rng.uniform(t_start + 0.05, t_end - 0.05, size=num_mutations))
    present = set(initial)
    events = []
    for t in times:
        pair = pairs[rng.integers(len(pairs))]
        if pair in present:
            present.discard(pair)
            events.append((*pair, float(t), Action.DELETE))
        else:
            present.add(pair)
            events.append((*pair, float(t), Action.INSERT))
    stream = EventStream(
        num_nodes=num_nodes, horizon=t_end + 1.0, initial_edges=initial, events=tuple(events)
    )
    values = rng.uniform(-1.0, 1.0, size=(num_mutations + 1, num_nodes))
    sched = MutationSchedule.from_stream(stream, t_start, t_end, tuple(values))
    return stream, sched, values


# ---------------------------------------------------------------------------
# segment weights


def test_weights_without_mutations_are_all_ones():
    sched = _blank_schedule(0.0, 1.5, ())
    w = segment_weights(sched, np.array([-1.0, -0.1, -40.0]))
    assert w.shape == (1, 3)
    assert np.all(w == 1.0)


def test_weights_midpoint_mutation_closed_form():
    # a = -1 on an interval of length 2 with one mutation at the midpoint:
    # last weight (e^{-1}-1)/(e^{-2}-1), first weight is its complement.
    sched = _blank_schedule(0.0, 2.0, (1.0,))
    w = segment_weights(sched, np.array([-1.0]))
    assert w[1, 0] == pytest.approx(0.7310585786300049, abs=1e-15)
    assert w[0, 0] == pytest.approx(0.2689414213699951, abs=1e-15)


def test_weights_are_convex_on_random_schedules():
    rng = np.random.default_rng(41)
    for _ in range(300):
        length = float(np.exp(rng.uniform(np.log(1e-3), np.log(50.0))))
        t_start = rng.uniform(0.0, 2.0)
        cuts = np.sort(rng.uniform(0.01, 0.99, size=rng.integers(0, 5)))
        times = tuple(t_start + float(f) * length for f in np.unique(cuts))
        sched = _blank_schedule(t_start, t_start + length, times)
        a = -np.exp(rng.uniform(-7.0, 3.5, size=rng.integers(1, 7)))
        w = segment_weights(sched, a)
        assert w.min() >= 0.0
        assert w.max() <= 1.0
        assert np.abs(w.sum(axis=0) - 1.0).max() <= 1e-12


def test_weights_ignore_features_and_graphs():
    rng = np.random.default_rng(43)
    times = (0.4, 1.1)
    adj = np.zeros((3, 3), dtype=bool)
    busy = np.triu(np.ones((3, 3), dtype=bool), 1)
    busy = busy | busy.T
    a = np.array([-0.5, -2.0])
    blank = MutationSchedule(0.0, 2.0, times, (adj,) * 3, tuple(np.zeros(3) for _ in range(3)))
    noisy = MutationSchedule(
        0.0, 2.0, times, (busy,) * 3, tuple(rng.normal(size=3) for _ in range(3))
    )
    assert np.array_equal(segment_weights(blank, a), segment_weights(noisy, a))


def test_weights_reject_nonnegative_diagonal():
    sched = _blank_schedule(0.0, 1.0, ())
    with pytest.raises(ValueError):
        segment_weights(sched, np.array([-1.0, 0.0]))


# ---------------------------------------------------------------------------
# schedule validation


def test_schedule_rejects_exterior_mutation_times():
    adj = np.zeros((2, 2), dtype=bool)
    with pytest.raises(ValueError):
        MutationSchedule(0.0, 1.0, (1.0,), (adj, adj), (np.zeros(2), np.zeros(2)))


def test_schedule_rejects_wrong_segment_count():
    adj = np.zeros((2, 2), dtype=bool)
    with pytest.raises(ValueError):
        MutationSchedule(0.0, 1.0, (0.5,), (adj,), (np.zeros(2),))


def test_schedule_rejects_empty_interval():
    adj = np.zeros((2, 2), dtype=bool)
    with pytest.raises(ValueError):
        MutationSchedule(1.0, 1.0, (), (adj,), (np.zeros(2),))


# ---------------------------------------------------------------------------
# oracle step


def test_oracle_step_tiny_interval_is_identity():
    u_prev = np.array([[0.7, -0.2], [0.1, 0.4]])
    sched = _blank_schedule(1.0, 1.0 + 1e-9, ())
    u_next = zoh_oracle_step(
        u_prev, sched, np.array([-1.0, -2.0]), np.ones(2), 0.0, LaplacianKind.SYMMETRIC
    )
    assert np.abs(u_next - u_prev).max() <= 1e-6


def test_oracle_step_single_segment_matches_scalar_closed_form():
    rng = np.random.default_rng(3)
    a = np.array([-0.7, -1.9, -0.05])
    b = np.array([1.0, 0.5, 2.0])
    x = rng.normal(size=4)
    u_prev = rng.normal(size=(4, 3))
    length = 1.3
    adj = np.zeros((4, 4), dtype=bool)
    sched = MutationSchedule(0.2, 0.2 + length, (), (adj,), (x,))
    u_next = zoh_oracle_step(u_prev, sched, a, b, 0.0, LaplacianKind.SYMMETRIC)
    expected = u_prev * np.exp(length * a) + np.outer(x, b) * (np.expm1(length * a) / a)
    assert u_next == pytest.approx(expected, abs=1e-14)


def test_oracle_step_matches_ode_integration_with_mutations():
    rng = np.random.default_rng(59)
    order = 4
    for alpha in (0.0, 1.0):
        stream, sched, values = _random_schedule(rng)
        a = -np.exp(rng.uniform(-1.5, 1.0, size=order))
        b = rng.uniform(0.5, 1.5, size=order)
        u0 = rng.normal(size=(stream.num_nodes, order))
        stepped = zoh_oracle_step(u0, sched, a, b, alpha, LaplacianKind.SYMMETRIC)

        times = np.asarray(sched.mutation_times)

        def path(t):
            return values[int(np.searchsorted(times, t, side="right"))]

        cfg = HippoConfig(order=order, alpha=alpha, ode_steps_per_unit=200)
        ode = integrate_hippo(
            stream,
            path,
            cfg,
            t_end=sched.t_end,
            u_start=u0,
            t_start=sched.t_start,
            system=(np.diag(a), b),
        )
        rel = np.linalg.norm(stepped - ode.u) / np.linalg.norm(ode.u)
        assert rel <= 1e-4


def test_oracle_step_semigroup_over_adjoining_intervals():
    rng = np.random.default_rng(61)
    stream, sched, values = _random_schedule(rng, num_mutations=4)
    a = -np.exp(rng.uniform(-1.0, 1.0, size=3))
    b = rng.uniform(0.5, 1.5, size=3)
    u0 = rng.normal(size=(stream.num_nodes, 3))
    alpha = 0.8

    whole = zoh_oracle_step(u0, sched, a, b, alpha, LaplacianKind.SYMMETRIC)

    times = np.asarray(sched.mutation_times)
    mid = 0.5 * (times[1] + times[2])  # interior split distinct from any mutation

    def seg_values(t):
        return values[int(np.searchsorted(times, t, side="right"))]

    first = MutationSchedule.from_stream(
        stream, sched.t_start, mid,
        tuple(seg_values(s) for s in (sched.t_start, *(t for t in times if t < mid))),
    )
    second = MutationSchedule.from_stream(
        stream, mid, sched.t_end,
        tuple(seg_values(s) for s in (mid, *(t for t in times if t > mid))),
    )
    half = zoh_oracle_step(u0, first, a, b, alpha, LaplacianKind.SYMMETRIC)
    split = zoh_oracle_step(half, second, a, b, alpha, LaplacianKind.SYMMETRIC)
    rel = np.linalg.norm(split - whole) / np.linalg.norm(whole)
    assert rel <= 1e-10


def test_oracle_step_rejects_wrong_state_shape():
    sched = _blank_schedule(0.0, 1.0, ())
    with pytest.raises(ValueError):
        zoh_oracle_step(np.zeros((3, 2)), sched, np.array([-1.0, -1.0]), np.ones(2), 0.0,
                        LaplacianKind.SYMMETRIC)


# ---------------------------------------------------------------------------
# practical step


def test_discrete_step_zero_delta_is_identity():
    rng = np.random.default_rng(7)
    u_prev = rng.normal(size=(3, 2))
    c = np.array([1.0, -2.0])
    u_next, y = discrete_step(u_prev, rng.normal(size=3), 0.0, np.array([-1.0, -0.5]),
                              np.ones(2), c)
    assert np.array_equal(u_next, u_prev)
    assert y == pytest.approx(u_prev @ c)


def test_discrete_step_zero_state_zero_input():
    u_next, y = discrete_step(np.zeros((2, 2)), np.zeros(2), 0.7, np.array([-1.0, -2.0]),
                              np.ones(2), np.ones(2))
    assert np.all(u_next == 0.0)
    assert np.all(y == 0.0)


def test_discrete_step_scalar_snapshot_evaluation():
    u_next, y = discrete_step(np.array([[0.5]]), np.array([1.0]), 1.0, np.array([-1.0]),
                              np.array([1.0]), np.array([1.0]))
    assert u_next[0, 0] == pytest.approx(0.5 * math.exp(-1.0) + 1.0, abs=1e-15)
    assert y[0] == pytest.approx(1.1839397205857212, abs=1e-15)


def test_discrete_step_drive_error_shrinks_quadratically():
    # the step approximates (e^{da}-1)/a by d; halving d cuts the gap ~4x
    a = np.array([-1.3])
    b = np.array([1.0])
    c = np.array([1.0])
    u_prev = np.array([[0.0]])
    x = np.array([1.0])

    def gap(delta):
        approx, _ = discrete_step(u_prev, x, delta, a, b, c)
        exact = np.expm1(delta * a) / a
        return abs(approx[0, 0] - exact[0])

    ratio_one = gap(0.2) / gap(0.1)
    ratio_two = gap(0.1) / gap(0.05)
    assert 3.4 <= ratio_one <= 4.6
    assert 3.7 <= ratio_two <= 4.3


def test_discrete_step_vectorized_channels_match_scalar_loop():
    rng = np.random.default_rng(13)
    v, d, n = 4, 3, 2
    a = -np.exp(rng.uniform(-1.0, 1.0, size=n))
    b = rng.normal(size=n)
    c = rng.normal(size=n)
    u_prev = rng.normal(size=(v, d, n))
    x = rng.normal(size=(v, d))
    delta = rng.uniform(0.1, 1.0, size=(v, d))
    u_next, y = discrete_step(u_prev, x, delta, a, b, c)
    for k in range(d):
        u_k, y_k = discrete_step(u_prev[:, k, :], x[:, k], delta[:, k], a, b, c)
        assert np.array_equal(u_next[:, k, :], u_k)
        assert y[:, k] == pytest.approx(y_k, abs=1e-14)  # matmul path differs by ~1 ulp


def test_discrete_step_per_node_delta_broadcasts_over_channels():
    rng = np.random.default_rng(17)
    v, d, n = 3, 2, 2
    a = np.array([-1.0, -0.3])
    b = np.ones(n)
    c = np.ones(n)
    u_prev = rng.normal(size=(v, d, n))
    x = rng.normal(size=(v, d))
    delta_v = rng.uniform(0.1, 1.0, size=v)
    direct = discrete_step(u_prev, x, delta_v, a, b, c)
    tiled = discrete_step(u_prev, x, np.tile(delta_v[:, None], (1, d)), a, b, c)
    assert np.array_equal(direct[0], tiled[0])


def test_discrete_step_rejects_negative_delta():
    with pytest.raises(ValueError):
        discrete_step(np.zeros((1, 1)), np.zeros(1), -0.1, np.array([-1.0]), np.ones(1),
                      np.ones(1))


def test_discrete_step_rejects_mismatched_state_vectors():
    with pytest.raises(ValueError):
        discrete_step(np.zeros((1, 2)), np.zeros(1), 0.1, np.array([-1.0, -1.0]), np.ones(1),
                      np.ones(2))


# ---------------------------------------------------------------------------
# mixed drive estimates


def _double_gnn(x, snap):
    return 2.0 * x


def test_mixed_estimate_feature_mix_with_pass_through_mix_is_ordinary():
    rng = np.random.default_rng(19)
    x_prev, x_cur = rng.normal(size=(2, 5, 3))
    take_current = lambda z_prev, z_cur: z_cur
    mixed = mixed_estimate(x_prev, x_cur, "g0", "g1", MixMechanism.FEATURE_MIX,
                           _double_gnn, take_current)
    plain = mixed_estimate(x_prev, x_cur, "g0", "g1", MixMechanism.ORDINARY,
                           _double_gnn, take_current)
    assert np.array_equal(mixed, plain)


def test_mixed_estimate_symmetric_mix_on_equal_inputs_is_ordinary():
    rng = np.random.default_rng(23)
    x = rng.normal(size=(4, 2))
    average = lambda z_prev, z_cur: 0.5 * (z_prev + z_cur)
    mixed = mixed_estimate(x, x, "g", "g", MixMechanism.REPR_MIX, _double_gnn, average)
    assert mixed == pytest.approx(_double_gnn(x, "g"))


def test_mixed_estimate_repr_mix_composes_gnn_then_mix():
    rng = np.random.default_rng(29)
    x_prev, x_cur = rng.normal(size=(2, 6, 4))
    gnn = lambda x, snap: x + (1.0 if snap == "cur" else -1.0)
    mix = lambda z_prev, z_cur: z_prev * z_cur
    got = mixed_estimate(x_prev, x_cur, "prev", "cur", MixMechanism.REPR_MIX, gnn, mix)
    assert np.array_equal(got, (x_prev - 1.0) * (x_cur + 1.0))


def test_mixed_estimate_without_predecessor_degrades_to_ordinary():
    rng = np.random.default_rng(31)
    x_cur = rng.normal(size=(3, 2))
    boom = lambda z_prev, z_cur: 1 / 0
    for mechanism in MixMechanism:
        got = mixed_estimate(None, x_cur, None, "g", mechanism, _double_gnn, boom)
        assert np.array_equal(got, 2.0 * x_cur)


def test_mixed_estimate_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        mixed_estimate(np.zeros((2, 2)), np.zeros((3, 2)), "g0", "g1",
                       MixMechanism.FEATURE_MIX, _double_gnn, lambda a, b: b)
