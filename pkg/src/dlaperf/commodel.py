"""Communication cost models: point-to-point transfers and the collective
schedules used by the algorithms (recursive-halving reduce-scatter, binomial
gather, scatter + all-gather broadcast, initial layer replication).

All message sizes are in 8-byte words; distances are rank differences.
Collectives over a single participant cost nothing.
"""

from __future__ import annotations

import math

from dlaperf.profile import MachineProfile, c_avg, c_max


def log2_exact(q: int, what: str = "q") -> int:
    """log2 of a power of two; anything else is a hard error."""
    if isinstance(q, float):
        if not q.is_integer():
            raise ValueError(f"{what} must be a power of two, got {q}")
        q = int(q)
    if q < 1 or q & (q - 1):
        raise ValueError(f"{what} must be a power of two, got {q}")
    return q.bit_length() - 1


def t_comm_ideal(profile: MachineProfile, w: float) -> float:
    if w < 0:
        raise ValueError(f"message size must be >= 0, got {w}")
    return profile.latency_s + profile.inv_bandwidth_s_per_word * w


def t_comm(profile: MachineProfile, w: float, d: float) -> float:
    return c_avg(profile, d) * t_comm_ideal(profile, w)


def t_comm_sync(profile: MachineProfile, p: int, w: float, d: float) -> float:
    return c_max(profile, p, d) * t_comm_ideal(profile, w)


def t_ini_repl(profile: MachineProfile, p: int, w: float, c: int) -> float:
    """Replicate A and B from the first layer to ``c`` layers.

    Charged at the worst (last-layer) distance. One layer needs no copies.
    """
    if c < 1 or p % c:
        raise ValueError(f"layer count c={c} must divide p={p}")
    if c == 1:
        return 0.0
    return 2.0 * c_max(profile, p, (c - 1) * p // c) * t_comm_ideal(profile, w)


def t_gather(profile: MachineProfile, q: int, w: float, d: float) -> float:
    """Binomial-tree gather of ``w`` words over ``q`` ranks spaced ``d`` apart."""
    steps = log2_exact(q)
    total = 0.0
    for i in range(steps):
        total += c_avg(profile, 2**i * d) * t_comm_ideal(profile, (w / q) * 2**i)
    return total


def t_all_gather_sync(profile: MachineProfile, p: int, q: int, w: float, d: float) -> float:
    """As :func:`t_gather`, but the last step waits for the slowest process."""
    steps = log2_exact(q)
    if steps == 0:
        return 0.0
    total = 0.0
    for i in range(steps - 1):
        total += c_avg(profile, 2**i * d) * t_comm_ideal(profile, (w / q) * 2**i)
    last = steps - 1
    return total + c_max(profile, p, 2**last * d) * t_comm_ideal(profile, (w / q) * 2**last)


def t_red_sca_sync(profile: MachineProfile, p: int, q: int, w: float, d: float,
                   final_multiplier: float | None = None) -> float:
    """Recursive-halving reduce-scatter; the final step uses C_max.

    The final step moves ``w * m / 2**(log2(q) - 1)`` words with ``m = q``
    unless ``final_multiplier`` overrides ``m`` (the literal thread-count
    reading of that term).
    """
    steps = log2_exact(q)
    if steps == 0:
        return 0.0
    m = q if final_multiplier is None else final_multiplier
    total = 0.0
    for i in range(steps - 1):
        total += c_avg(profile, 2**i * d) * t_comm_ideal(profile, w * q / 2**i)
    last = steps - 1
    return total + c_max(profile, p, 2**last * d) * t_comm_ideal(profile, w * m / 2**last)


def t_reduce(profile: MachineProfile, p: int, q: int, w: float, d: float,
             final_multiplier: float | None = None) -> float:
    """Rabenseifner reduce: reduce-scatter, synchronise, gather to the root."""
    return (t_red_sca_sync(profile, p, q, w, d, final_multiplier)
            + t_gather(profile, q, w, d))


t_scatter_sync = t_red_sca_sync
t_all_gather = t_gather


def t_bcast(profile: MachineProfile, p: int, q: int, w: float, d: float,
            final_multiplier: float | None = None) -> float:
    """Broadcast as scatter followed by all-gather."""
    return (t_scatter_sync(profile, p, q, w, d, final_multiplier)
            + t_all_gather(profile, q, w, d))


def t_bcast_sync(profile: MachineProfile, p: int, q: int, w: float, d: float,
                 final_multiplier: float | None = None) -> float:
    """Broadcast whose all-gather also ends on a synchronisation."""
    return (t_scatter_sync(profile, p, q, w, d, final_multiplier)
            + t_all_gather_sync(profile, p, q, w, d))


def is_power_of_two(x: int) -> bool:
    return x >= 1 and not x & (x - 1)


def isqrt_exact(x: int) -> int | None:
    if x < 0:
        return None
    s = math.isqrt(x)
    return s if s * s == x else None
