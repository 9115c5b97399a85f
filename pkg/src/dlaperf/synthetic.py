"""Synthetic, XE6-like machine profiles for tests and what-if studies.

The shapes follow the qualitative behaviour of a Cray XE6 with a
Gemini torus; the numbers are made up and are not measurements.

* ``C_avg(d) = 1 + avg_slope * log2(d) ** avg_power`` grows with distance
  and ignores the process count.
* ``C_max(p, d) = C_avg(d) * (1 + max_slope * log2(p / p_min + 1) * log2(2 d))``
  grows with both the process count and the distance, and is never below
  ``C_avg``.
* Kernel efficiency ``e(n) = e_max * n / (n + n_half)`` rises with the
  matrix dimension and saturates; times are ``flops(n) / (e(n) * peak)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from dlaperf.profile import CalibrationTable, EfficiencyCurve, MachineProfile, check

# flops of one square call, as multiples of n**3
KERNEL_FLOPS = {"dgemm": 2.0, "dtrsm": 1.0, "dsyrk": 1.0, "dpotrf": 1.0 / 3.0}
KERNEL_EFFICIENCY = {"dgemm": 0.92, "dtrsm": 0.85, "dsyrk": 0.88, "dpotrf": 0.75}


@dataclass(frozen=True)
class SyntheticParams:
    name: str = "synthetic-xe6"
    latency_s: float = 1.5e-6
    # 8-byte words over a ~5 GB/s contention-free link
    inv_bandwidth_s_per_word: float = 1.6e-9
    peak_flops_per_core: float = 8.4e9
    cores_per_process: int = 6
    avg_slope: float = 0.12
    avg_power: float = 1.0
    max_slope: float = 0.12
    p_min: int = 64
    p_max: int = 65536
    d_max: int = 262144
    n_half: float = 96.0
    dim_min: int = 32
    dim_max: int = 32768


def _c_avg(prm: SyntheticParams, d: int) -> float:
    return 1.0 + prm.avg_slope * math.log2(d) ** prm.avg_power


def _c_max(prm: SyntheticParams, p: int, d: int) -> float:
    growth = prm.max_slope * math.log2(p / prm.p_min + 1) * math.log2(2 * d)
    return _c_avg(prm, d) * (1.0 + growth)


def _powers(lo: int, hi: int) -> list[int]:
    out, k = [], lo
    while k <= hi:
        out.append(k)
        k *= 2
    return out


def gen_synthetic_profile(params: SyntheticParams | None = None) -> MachineProfile:
    prm = params or SyntheticParams()
    for field_name in ("latency_s", "inv_bandwidth_s_per_word", "peak_flops_per_core",
                       "cores_per_process", "avg_slope", "max_slope", "p_min", "p_max",
                       "d_max", "n_half", "dim_min", "dim_max"):
        if not getattr(prm, field_name) > 0:
            raise ValueError(f"{field_name} must be positive")
    peak = prm.peak_flops_per_core * prm.cores_per_process
    kernels = {}
    for name, coeff in KERNEL_FLOPS.items():
        samples = []
        for n in _powers(prm.dim_min, prm.dim_max):
            eff = KERNEL_EFFICIENCY[name] * n / (n + prm.n_half)
            samples.append((n, coeff * n**3 / (eff * peak)))
        kernels[name] = (EfficiencyCurve(name, prm.cores_per_process, tuple(samples)),)
    distances = _powers(1, prm.d_max)
    avg = CalibrationTable(("d",), [((d,), _c_avg(prm, d)) for d in distances])
    mx = CalibrationTable(("p", "d"), [
        ((p, d), _c_max(prm, p, d)) for p in _powers(prm.p_min, prm.p_max) for d in distances
    ])
    return check(MachineProfile(
        name=prm.name,
        latency_s=prm.latency_s,
        inv_bandwidth_s_per_word=prm.inv_bandwidth_s_per_word,
        peak_flops_per_core=prm.peak_flops_per_core,
        cores_per_process=prm.cores_per_process,
        kernels=kernels,
        calib_avg=avg,
        calib_max=mx,
    ))
