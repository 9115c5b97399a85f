"""Local computation time for the numerical kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass

from dlaperf.profile import MachineProfile, t_rout


@dataclass(frozen=True)
class KernelCall:
    kernel: str
    rows: int
    cols: int
    threads: int

    def seconds(self, profile: MachineProfile) -> float:
        return t_rect(profile, self.kernel, self.rows, self.cols, self.threads)


def t_square(profile: MachineProfile, kernel: str, bs: int, t: int) -> float:
    return t_rout(profile, kernel, bs, t)


def t_rect(profile: MachineProfile, kernel: str, rows: int, cols: int, t: int) -> float:
    """A ``rows`` x ``cols`` call costed as consecutive square calls.

    The square side is the smaller dimension; a partial last panel is charged
    as a full square.
    """
    if rows < 0 or cols < 0:
        raise ValueError(f"dimensions must be >= 0, got {rows}x{cols}")
    if rows == 0 or cols == 0:
        return 0.0
    side = min(rows, cols)
    count = math.ceil(max(rows, cols) / side)
    return count * t_square(profile, kernel, side, t)


def fractional_scale(time: float, factor: float) -> float:
    """Scale by an expected (possibly non-integer) per-process workload count."""
    if factor < 0:
        raise ValueError(f"workload factor must be >= 0, got {factor}")
    return time * factor
