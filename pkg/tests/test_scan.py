from __future__ import annotations

import numpy as np
import pytest

from gssm import RecurrenceInputs, bench_recurrence, combine, scan_parallel, scan_sequential


def _random_inputs(rng, length, lane_shape=()):
    decay = rng.uniform(0.2, 1.0, size=(length, *lane_shape))
    drive = rng.standard_normal((length, *lane_shape))
    u0 = rng.standard_normal(lane_shape)
    return RecurrenceInputs(decay=decay, drive=drive, u0=u0)


def test_identity_dynamics_keep_initial_state():
    u0 = np.array([1.5, -2.0])
    inp = RecurrenceInputs(decay=np.ones((5, 2)), drive=np.zeros((5, 2)), u0=u0)
    for states in (scan_sequential(inp), scan_parallel(inp)):
        assert np.array_equal(states, np.tile(u0, (5, 1)))


def test_memoryless_dynamics_echo_the_drive():
    rng = np.random.default_rng(2)
    drive = rng.standard_normal((6, 3))
    inp = RecurrenceInputs(decay=np.zeros((6, 3)), drive=drive, u0=np.zeros(3))
    assert np.array_equal(scan_sequential(inp), drive)
    assert scan_parallel(inp) == pytest.approx(drive, abs=1e-10)


def test_sequential_matches_closed_form_at_length_nine():
    rng = np.random.default_rng(9)
    inp = _random_inputs(rng, 9, (4,))
    states = scan_sequential(inp)
    for l in range(9):
        expected = np.prod(inp.decay[: l + 1], axis=0) * inp.u0
        for k in range(l + 1):
            expected = expected + np.prod(inp.decay[k + 1 : l + 1], axis=0) * inp.drive[k]
        assert states[l] == pytest.approx(expected, abs=1e-12)


def test_combine_rule_is_associative():
    rng = np.random.default_rng(12)
    for _ in range(50):
        x, y, z = (
            (rng.standard_normal(3), rng.standard_normal(3)) for _ in range(3)
        )
        left = combine(combine(x, y), z)
        right = combine(x, combine(y, z))
        assert left[0] == pytest.approx(right[0], abs=1e-12)
        assert left[1] == pytest.approx(right[1], abs=1e-12)


def test_parallel_single_step_equals_sequential():
    rng = np.random.default_rng(21)
    inp = _random_inputs(rng, 1, (3,))
    assert scan_parallel(inp) == pytest.approx(scan_sequential(inp), abs=0.0)


def test_parallel_matches_sequential_across_chunk_sizes():
    rng = np.random.default_rng(31)
    inp = _random_inputs(rng, 128, (5,))
    reference = scan_sequential(inp)
    for chunk in (1, 2, 7, 12, 128, 200):
        assert np.abs(scan_parallel(inp, chunk=chunk) - reference).max() <= 1e-10


def test_parallel_matches_sequential_on_stacked_lane_axes():
    rng = np.random.default_rng(37)
    inp = _random_inputs(rng, 40, (3, 2, 4))
    delta = np.abs(scan_parallel(inp) - scan_sequential(inp)).max()
    assert delta <= 1e-10


def test_parallel_default_chunk_is_deterministic():
    rng = np.random.default_rng(41)
    inp = _random_inputs(rng, 100, (6,))
    assert np.array_equal(scan_parallel(inp), scan_parallel(inp))
    assert np.array_equal(scan_sequential(inp), scan_sequential(inp))


def test_thread_split_changes_nothing():
    rng = np.random.default_rng(43)
    inp = _random_inputs(rng, 64, (8,))
    lone = scan_parallel(inp, threads=1)
    assert np.array_equal(scan_parallel(inp, threads=2), lone)
    assert np.array_equal(scan_parallel(inp, threads=3), lone)
    assert np.array_equal(scan_parallel(inp, threads=0), lone)  # 0 = auto


def test_parallel_rejects_zero_chunk():
    rng = np.random.default_rng(47)
    inp = _random_inputs(rng, 8, (2,))
    with pytest.raises(ValueError):
        scan_parallel(inp, chunk=0)


def test_inputs_reject_shape_mismatches():
    with pytest.raises(ValueError):
        RecurrenceInputs(decay=np.ones((4, 2)), drive=np.ones((4, 3)), u0=np.zeros(2))
    with pytest.raises(ValueError):
        RecurrenceInputs(decay=np.ones((4, 2)), drive=np.ones((4, 2)), u0=np.zeros(3))


def test_bench_emits_one_row_per_length_and_backend():
    rows = bench_recurrence([16, 32], lanes=4, repeats=1)
    assert len(rows) == 4
    assert [r["L"] for r in rows] == [16, 16, 32, 32]
    for row in rows:
        assert set(row) == {"L", "lanes", "backend", "ns_per_element"}
        assert row["lanes"] == 4
        assert row["backend"] in ("sequential", "parallel")
        assert row["ns_per_element"] > 0.0


def test_bench_rejects_unknown_backend():
    with pytest.raises(ValueError):
        bench_recurrence([8], lanes=2, backends=("fancy",), repeats=1)
