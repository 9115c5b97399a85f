"""Collective and point-to-point costs against hand-expanded sums.

Stub profiles: ``make_profile(latency, beta, avg, mx)`` with a single-sample
table is a constant factor everywhere.
"""

import random

import pytest

from conftest import make_profile
from dlaperf import commodel as cm


def const(avg=1.0, mx=1.0, latency=0.0, beta=1.0):
    return make_profile(latency=latency, beta=beta, avg={1: avg}, mx={(2, 1): mx})


def test_comm_ideal():
    p = make_profile(latency=2e-6, beta=1e-9)
    assert cm.t_comm_ideal(p, 0) == 2e-6
    assert cm.t_comm_ideal(p, 1e6) == pytest.approx(2e-6 + 1e-3, rel=1e-15)
    q = make_profile(latency=0.0, beta=1e-9)
    assert cm.t_comm_ideal(q, 2e6) == 2 * cm.t_comm_ideal(q, 1e6)


def test_comm_uses_average_factor():
    p = make_profile(latency=0.0, beta=1e-9, avg={1: 1.0, 16: 3.0}, mx={(2, 1): 3.0})
    assert cm.t_comm(p, 1e6, 16) == pytest.approx(3e-3, rel=1e-15)
    assert cm.t_comm(p, 1e6, 0) == cm.t_comm_ideal(p, 1e6)
    unit = const(beta=1e-9)
    assert cm.t_comm(unit, 5e5, 7) == cm.t_comm_ideal(unit, 5e5)


def test_comm_sync_uses_max_factor():
    p = make_profile(latency=2e-6, beta=1e-9, avg={16: 1.0}, mx={(1024, 16): 3.0})
    assert cm.t_comm_sync(p, 1024, 0, 16) == pytest.approx(6e-6, rel=1e-15)
    assert cm.t_comm_sync(p, 1, 1e6, 16) == cm.t_comm_ideal(p, 1e6)


def test_ini_repl():
    unit = const()
    assert cm.t_ini_repl(unit, 8, 10, 1) == 0.0
    assert cm.t_ini_repl(unit, 8, 10, 2) == 20.0
    with pytest.raises(ValueError, match="divide"):
        cm.t_ini_repl(unit, 8, 10, 3)


def test_ini_repl_uses_last_layer_distance():
    # C_max grows with distance; (4 - 1) * 64 / 4 = 48
    p = make_profile(avg={1: 1.0}, mx={(64, 1): 1.0, (64, 2**10): 11.0})
    expected_factor = p.c_max(64, 48)
    assert cm.t_ini_repl(p, 64, 5, 4) == 2 * expected_factor * 5
    assert expected_factor != p.c_max(64, 16)


@pytest.mark.parametrize("q, latency, w, expected", [
    (1, 1.0, 8, 0.0),
    (2, 1.0, 8, 1 + 8 / 2),                      # one round
    (4, 0.0, 4, (4 / 4) * 1 + (4 / 4) * 2),      # rounds move w/q, 2w/q
    (8, 0.0, 8, 1 + 2 + 4),
])
def test_gather_hand_expansion(q, latency, w, expected):
    assert cm.t_gather(const(latency=latency), q, w, 1) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("q, latency, beta, w, expected", [
    (1, 0.0, 1.0, 3, 0.0),
    (2, 0.0, 1.0, 3, 3 * 2 / 1),                  # only the final term: w*q/2^0
    (4, 1.0, 0.0, 5, 1 + 1),                      # two latency terms
    (4, 0.0, 1.0, 4, 4 * 4 / 1 + 4 * 4 / 2),      # 16 + 8
    (8, 0.0, 1.0, 1, 8 / 1 + 8 / 2 + 8 / 4),      # 8 + 4 + 2
])
def test_red_sca_hand_expansion(q, latency, beta, w, expected):
    assert cm.t_red_sca_sync(const(latency=latency, beta=beta), 64, q, w, 1) == pytest.approx(expected, rel=1e-12)


def test_red_sca_final_term_uses_max_factor():
    p = const(avg=1.0, mx=2.0)
    # q=4, w=4: average round 16, synchronised final round 2 * 8
    assert cm.t_red_sca_sync(p, 64, 4, 4, 1) == 16 + 16


def test_red_sca_literal_thread_term():
    p = const()
    # final round w*t/2^(log2 q - 1) with t = 6 instead of q = 4
    assert cm.t_red_sca_sync(p, 64, 4, 4, 1, final_multiplier=6) == 16 + 4 * 6 / 2


def test_reduce_is_sum_of_parts():
    unit = const()
    assert cm.t_reduce(unit, 64, 1, 4, 1) == 0.0
    assert cm.t_reduce(unit, 64, 4, 4, 1) == pytest.approx(24 + 3, rel=1e-12)
    p = const(avg=1.3, mx=2.1, latency=1e-6, beta=1e-9)
    assert cm.t_reduce(p, 64, 2, 1000, 3) == cm.t_red_sca_sync(p, 64, 2, 1000, 3) + cm.t_gather(p, 2, 1000, 3)


def test_bcast_hand_expansion():
    p = const(avg=1.0, mx=2.0)
    # q=2, w=8: scatter final round 2*(8*2/1) = 32; all-gather round (8/2) = 4
    assert cm.t_bcast(p, 64, 2, 8, 1) == 32 + 4
    assert cm.t_bcast_sync(p, 64, 2, 8, 1) == 32 + 2 * 4
    # q=8, w=8: scatter 64 + 32 + 2*16; all-gather 1 + 2 + (4 or 2*4)
    assert cm.t_bcast(p, 64, 8, 8, 1) == 128 + 7
    assert cm.t_bcast_sync(p, 64, 8, 8, 1) == 128 + 11
    for q in (1, 2, 4, 8):
        unit = const()
        assert cm.t_bcast(unit, 64, q, 8, 1) == cm.t_bcast_sync(unit, 64, q, 8, 1)
    assert cm.t_bcast(p, 64, 1, 8, 1) == 0.0
    assert cm.t_bcast_sync(p, 64, 1, 8, 1) == 0.0


def test_distances_double_each_round():
    p = make_profile(avg={1: 1.0, 2: 2.0, 4: 4.0, 8: 8.0}, mx={(2, 1): 100.0})
    # gather q=8, d=1, w=8: factors 1, 2, 4 on sizes 1, 2, 4
    assert cm.t_gather(p, 8, 8, 1) == 1 * 1 + 2 * 2 + 4 * 4
    # d=2 shifts every round one step further
    assert cm.t_gather(p, 4, 4, 2) == 2 * 1 + 4 * 2


def test_aliases():
    rng = random.Random(5)
    for _ in range(10):
        p = make_profile(latency=rng.random() * 1e-5, beta=rng.random() * 1e-8,
                         avg={1: 1.0, 64: 1 + rng.random()}, mx={(16, 1): 2.0, (4096, 64): 5.0})
        args = (rng.choice([16, 256, 4096]), rng.choice([1, 2, 4, 8, 16]), rng.random() * 1e6, rng.choice([1, 2, 8]))
        assert cm.t_scatter_sync(p, *args) == cm.t_red_sca_sync(p, *args)
        assert cm.t_all_gather(p, *args[1:]) == cm.t_gather(p, *args[1:])


@pytest.mark.parametrize("fn, args", [
    (cm.t_gather, (3, 8, 1)),
    (cm.t_red_sca_sync, (64, 6, 8, 1)),
    (cm.t_bcast, (64, 12, 8, 1)),
    (cm.t_bcast_sync, (64, 0, 8, 1)),
])
def test_non_power_of_two_rejected(fn, args):
    with pytest.raises(ValueError, match="power of two"):
        fn(const(), *args)


def test_costs_nonnegative_and_increasing_in_w(synthetic):
    rng = random.Random(9)
    for _ in range(200):
        p = rng.choice([4, 64, 1024, 16384])
        q = rng.choice([1, 2, 4, 8, 16, 32])
        d = rng.choice([1, 2, 16, 128])
        w = rng.random() * 1e6
        for fn in (cm.t_gather, cm.t_all_gather):
            lo, hi = fn(synthetic, q, w, d), fn(synthetic, q, w * 1.5 + 1, d)
            assert 0 <= lo and (hi > lo or q == 1)
        for fn in (cm.t_red_sca_sync, cm.t_reduce, cm.t_bcast, cm.t_bcast_sync):
            lo, hi = fn(synthetic, p, q, w, d), fn(synthetic, p, q, w * 1.5 + 1, d)
            assert 0 <= lo and (hi > lo or q == 1)
        assert cm.t_bcast_sync(synthetic, p, q, w, d) >= cm.t_bcast(synthetic, p, q, w, d)
        assert cm.t_comm_sync(synthetic, p, w, d) >= cm.t_comm(synthetic, w, d)
