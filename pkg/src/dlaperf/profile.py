"""Machine profiles: latency, bandwidth, kernel timing curves and contention
calibration tables for one target machine.

Profiles are plain JSON documents. Everything the cost models consume that
was measured on a machine lives here, and all lookups (calibration factors,
kernel times) are pure functions of an immutable profile.

Interpolation is linear in log2 of distance, process count and matrix
dimension; lookups outside the sampled range clamp to the nearest edge.
Extrapolation beyond sampled process counts is a separate, explicit step
(:func:`extrapolate_cmax`).

Calibration tables carry no message-size axis, so a profile is only
meaningful for transfers of 256 KB or more. A word is 8 bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

import numpy as np

WORD_BYTES = 8


class ProfileError(ValueError):
    """Raised when a profile cannot be parsed or violates its invariants."""

    def __init__(self, problems: Sequence[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class EfficiencyCurve:
    kernel: str
    threads: int
    samples: tuple[tuple[int, float], ...]

    def problems(self) -> list[str]:
        where = f"kernel {self.kernel!r} (threads={self.threads})"
        out = []
        if self.threads < 1:
            out.append(f"{where}: threads must be >= 1")
        if len(self.samples) < 2:
            out.append(f"{where}: needs at least 2 samples")
        dims = [s[0] for s in self.samples]
        if any(b <= a for a, b in zip(dims, dims[1:])):
            out.append(f"{where}: dimensions must be strictly increasing")
        if any(d < 1 for d in dims):
            out.append(f"{where}: dimensions must be >= 1")
        if any(not (t > 0) for _, t in self.samples):
            out.append(f"{where}: times must be strictly positive")
        return out


class CalibrationTable:
    """Sampled calibration factors keyed by ``(d,)`` or ``(p, d)`` tuples.

    Lookups are memoised; the table itself never changes after construction.
    """

    def __init__(self, axes: Sequence[str], samples: Iterable[tuple[Sequence[int], float]]):
        self.axes = tuple(axes)
        self.samples = tuple((tuple(k), float(v)) for k, v in samples)
        self._cache: dict[tuple, float] = {}
        self._by_p: dict[int, tuple[np.ndarray, np.ndarray]] | None = None

    def __repr__(self) -> str:
        return f"CalibrationTable(axes={self.axes}, samples={len(self.samples)})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CalibrationTable):
            return NotImplemented
        return self.axes == other.axes and sorted(self.samples) == sorted(other.samples)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return dict(self.samples)

    def problems(self, label: str) -> list[str]:
        out = []
        if not self.samples:
            out.append(f"{label}: table is empty")
        keys = [k for k, _ in self.samples]
        if len(set(keys)) != len(keys):
            out.append(f"{label}: duplicate keys")
        for key, value in self.samples:
            if len(key) != len(self.axes):
                out.append(f"{label}{list(key)}: expected {len(self.axes)} key fields")
                continue
            if key[-1] < 1:
                out.append(f"{label}{list(key)}: distance must be >= 1")
            if len(key) == 2 and key[0] < 1:
                out.append(f"{label}{list(key)}: process count must be >= 1")
            if not value >= 1.0:
                out.append(f"{label}{list(key)}: factor < 1 ({value!r})")
        return out

    # 1-D lookup over distance (calib_avg)
    def lookup_d(self, d: float) -> float:
        hit = self._cache.get((d,))
        if hit is None:
            pts = sorted((k[-1], v) for k, v in self.samples)
            xs = np.log2([k for k, _ in pts])
            ys = np.array([v for _, v in pts])
            hit = float(np.interp(math.log2(d), xs, ys))
            self._cache[(d,)] = hit
        return hit

    # 2-D lookup: along d within each sampled p, then along p
    def lookup_pd(self, p: float, d: float) -> float:
        hit = self._cache.get((p, d))
        if hit is None:
            if self._by_p is None:
                grouped: dict[int, list[tuple[int, float]]] = {}
                for (kp, kd), v in self.samples:
                    grouped.setdefault(kp, []).append((kd, v))
                self._by_p = {
                    kp: (np.log2([x for x, _ in sorted(g)]), np.array([v for _, v in sorted(g)]))
                    for kp, g in sorted(grouped.items())
                }
            ld = math.log2(d)
            ps = list(self._by_p)
            along_d = [float(np.interp(ld, *self._by_p[kp])) for kp in ps]
            hit = float(np.interp(math.log2(p), np.log2(ps), along_d))
            self._cache[(p, d)] = hit
        return hit


@dataclass(frozen=True, eq=False)
class MachineProfile:
    name: str
    latency_s: float
    inv_bandwidth_s_per_word: float
    peak_flops_per_core: float
    cores_per_process: int
    kernels: dict[str, tuple[EfficiencyCurve, ...]]
    calib_avg: CalibrationTable
    calib_max: CalibrationTable
    _kernel_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def peak_flops_per_process(self) -> float:
        return self.peak_flops_per_core * self.cores_per_process

    def c_avg(self, d: float) -> float:
        return c_avg(self, d)

    def c_max(self, p: float, d: float) -> float:
        return c_max(self, p, d)

    def t_rout(self, kernel: str, dim: int, t: int) -> float:
        return t_rout(self, kernel, dim, t)


def validate(profile: MachineProfile) -> list[str]:
    """Return every violated invariant (empty list means valid)."""
    out = []
    for attr in ("latency_s", "inv_bandwidth_s_per_word", "peak_flops_per_core"):
        value = getattr(profile, attr)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            out.append(f"{attr}: must be a finite number > 0, got {value!r}")
    if not (isinstance(profile.cores_per_process, int) and profile.cores_per_process >= 1):
        out.append(f"cores_per_process: must be an integer >= 1, got {profile.cores_per_process!r}")
    if not profile.kernels:
        out.append("kernels: at least one curve required")
    for name, curves in profile.kernels.items():
        threads = [c.threads for c in curves]
        if len(set(threads)) != len(threads):
            out.append(f"kernel {name!r}: more than one curve for the same thread count")
        for curve in curves:
            out.extend(curve.problems())
    avg_problems = profile.calib_avg.problems("calib_avg")
    max_problems = profile.calib_max.problems("calib_max")
    out.extend(avg_problems)
    out.extend(max_problems)
    if not avg_problems and not max_problems:
        avg = profile.calib_avg.as_dict()
        for (p, d), factor in profile.calib_max.samples:
            if (d,) in avg and factor < avg[(d,)]:
                out.append(f"calib_max[{p}, {d}]: {factor!r} is below calib_avg[{d}] = {avg[(d,)]!r}")
    return out


def check(profile: MachineProfile) -> MachineProfile:
    problems = validate(profile)
    if problems:
        raise ProfileError(problems)
    return profile


def c_avg(profile: MachineProfile, d: float) -> float:
    """Average contention factor for all processes talking at distance ``d``."""
    if d < 0:
        raise ValueError(f"distance must be >= 0, got {d}")
    if d == 0:
        return 1.0
    return profile.calib_avg.lookup_d(d)


def c_max(profile: MachineProfile, p: float, d: float) -> float:
    """Worst-process contention factor for ``p`` processes at distance ``d``.

    Never below ``c_avg(d)``, so the max/avg ordering holds between samples too.
    """
    if p < 1:
        raise ValueError(f"process count must be >= 1, got {p}")
    if d < 0:
        raise ValueError(f"distance must be >= 0, got {d}")
    if d == 0 or p == 1:
        return 1.0
    return max(profile.calib_max.lookup_pd(p, d), c_avg(profile, d))


def _pick_curve(profile: MachineProfile, kernel: str, t: int) -> EfficiencyCurve:
    try:
        curves = profile.kernels[kernel]
    except KeyError:
        raise KeyError(f"unknown kernel {kernel!r}; profile has {sorted(profile.kernels)}") from None
    for curve in curves:
        if curve.threads == t:
            return curve
    # nearest thread count on a log scale, ties toward more threads
    return min(curves, key=lambda c: (abs(math.log2(c.threads / t)), -c.threads))


def t_rout(profile: MachineProfile, kernel: str, dim: int, t: int) -> float:
    """Time for one square ``dim`` x ``dim`` call of ``kernel`` on ``t`` threads.

    Between samples the achieved rate ``dim**3 / time`` is interpolated
    log-linearly in log2(dim); outside the sampled range the edge rate is held.
    Without a curve measured at ``t`` threads, time scales by ``t0 / t``.
    """
    if dim < 0:
        raise ValueError(f"matrix dimension must be >= 0, got {dim}")
    if t < 1:
        raise ValueError(f"thread count must be >= 1, got {t}")
    if dim == 0:
        return 0.0
    key = (kernel, dim, t)
    cached = profile._kernel_cache.get(key)
    if cached is not None:
        return cached
    curve = _pick_curve(profile, kernel, t)
    dims = np.array([s[0] for s in curve.samples], dtype=float)
    times = np.array([s[1] for s in curve.samples], dtype=float)
    log_rate = 3.0 * np.log2(dims) - np.log2(times)
    rate_exp = float(np.interp(math.log2(dim), np.log2(dims), log_rate))
    seconds = 2.0 ** (3.0 * math.log2(dim) - rate_exp) * curve.threads / t
    profile._kernel_cache[key] = seconds
    return seconds


def _fit_at(profile: MachineProfile, p_target: float, degree: int) -> dict[int, float]:
    by_d: dict[int, list[tuple[int, float]]] = {}
    for (p, d), v in profile.calib_max.samples:
        by_d.setdefault(d, []).append((p, v))
    out = {}
    for d, pts in sorted(by_d.items()):
        if len({p for p, _ in pts}) < degree + 1:
            raise ProfileError(
                f"insufficient samples: distance {d} has {len(pts)} distinct process counts, "
                f"degree {degree} needs {degree + 1}"
            )
        x = np.log2([p for p, _ in pts])
        y = np.array([v for _, v in pts])
        coeffs = np.polynomial.polynomial.polyfit(x, y, degree)
        value = float(np.polynomial.polynomial.polyval(math.log2(p_target), coeffs))
        out[d] = max(value, c_avg(profile, d), 1.0)
    return out


def fit_cmax(profile: MachineProfile, p: float, degree: int = 2) -> dict[int, float]:
    """Least-squares polynomial (in log2 p) estimate of C_max at ``p`` per sampled distance."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    return _fit_at(profile, p, degree)


def extrapolate_cmax(profile: MachineProfile, p_target: int, degree: int = 2) -> CalibrationTable:
    """Return a copy of ``calib_max`` extended with fitted values at ``p_target``."""
    sampled = {p for (p, _), _ in profile.calib_max.samples}
    if p_target <= max(sampled):
        raise ProfileError(
            f"target not beyond sampled range: p_target={p_target} <= max sampled p={max(sampled)}"
        )
    fitted = fit_cmax(profile, p_target, degree)
    samples = list(profile.calib_max.samples)
    samples.extend(((p_target, d), v) for d, v in fitted.items())
    return CalibrationTable(profile.calib_max.axes, samples)


def with_calib_max(profile: MachineProfile, table: CalibrationTable) -> MachineProfile:
    return replace(profile, calib_max=table, _kernel_cache={})


# -- serialisation -----------------------------------------------------------

def _reject_constant(name: str):
    raise ValueError(f"{name} is not permitted")


def _number(value, where: str, integral: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProfileError(f"{where}: expected a number, got {value!r}")
    if integral:
        if isinstance(value, float):
            if not value.is_integer():
                raise ProfileError(f"{where}: expected an integer, got {value!r}")
            value = int(value)
    elif not math.isfinite(value):
        raise ProfileError(f"{where}: non-finite number")
    return value


def _pairs(raw, where: str, width: int) -> list:
    if not isinstance(raw, list):
        raise ProfileError(f"{where}: expected an array")
    out = []
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != width:
            raise ProfileError(f"{where}[{i}]: expected an array of {width} numbers")
        out.append(row)
    return out


def from_dict(doc: dict) -> MachineProfile:
    if not isinstance(doc, dict):
        raise ProfileError("profile: top level must be a JSON object")
    required = ["name", "latency_s", "inv_bandwidth_s_per_word", "peak_flops_per_core",
                "cores_per_process", "kernels", "calib_avg", "calib_max"]
    missing = [k for k in required if k not in doc]
    if missing:
        raise ProfileError([f"{k}: missing" for k in missing])

    kernels: dict[str, list[EfficiencyCurve]] = {}
    if not isinstance(doc["kernels"], list):
        raise ProfileError("kernels: expected an array")
    for i, entry in enumerate(doc["kernels"]):
        where = f"kernels[{i}]"
        if not isinstance(entry, dict) or not {"kernel", "threads", "samples"} <= entry.keys():
            raise ProfileError(f"{where}: expected an object with kernel, threads, samples")
        samples = tuple(
            (_number(dim, f"{where}.samples[{j}][0]", integral=True),
             float(_number(sec, f"{where}.samples[{j}][1]")))
            for j, (dim, sec) in enumerate(_pairs(entry["samples"], f"{where}.samples", 2))
        )
        curve = EfficiencyCurve(
            kernel=str(entry["kernel"]),
            threads=_number(entry["threads"], f"{where}.threads", integral=True),
            samples=samples,
        )
        kernels.setdefault(curve.kernel, []).append(curve)

    avg = CalibrationTable(("d",), [
        ((_number(d, f"calib_avg[{i}][0]", integral=True),), float(_number(v, f"calib_avg[{i}][1]")))
        for i, (d, v) in enumerate(_pairs(doc["calib_avg"], "calib_avg", 2))
    ])
    mx = CalibrationTable(("p", "d"), [
        ((_number(p, f"calib_max[{i}][0]", integral=True), _number(d, f"calib_max[{i}][1]", integral=True)),
         float(_number(v, f"calib_max[{i}][2]")))
        for i, (p, d, v) in enumerate(_pairs(doc["calib_max"], "calib_max", 3))
    ])
    profile = MachineProfile(
        name=str(doc["name"]),
        latency_s=float(_number(doc["latency_s"], "latency_s")),
        inv_bandwidth_s_per_word=float(_number(doc["inv_bandwidth_s_per_word"], "inv_bandwidth_s_per_word")),
        peak_flops_per_core=float(_number(doc["peak_flops_per_core"], "peak_flops_per_core")),
        cores_per_process=_number(doc["cores_per_process"], "cores_per_process", integral=True),
        kernels={k: tuple(v) for k, v in kernels.items()},
        calib_avg=avg,
        calib_max=mx,
    )
    return check(profile)


def load_profile(source: IO[str] | str) -> MachineProfile:
    """Parse and validate a profile from a text stream or a JSON string."""
    text = source if isinstance(source, str) else source.read()
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ProfileError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except ValueError as exc:
        raise ProfileError(f"profile: {exc}") from exc
    return from_dict(doc)


def load_profile_path(path) -> MachineProfile:
    with open(path, encoding="utf-8") as fh:
        return load_profile(fh)


def to_dict(profile: MachineProfile) -> dict:
    return {
        "name": profile.name,
        "latency_s": profile.latency_s,
        "inv_bandwidth_s_per_word": profile.inv_bandwidth_s_per_word,
        "peak_flops_per_core": profile.peak_flops_per_core,
        "cores_per_process": profile.cores_per_process,
        "kernels": [
            {"kernel": c.kernel, "threads": c.threads, "samples": [[d, t] for d, t in c.samples]}
            for curves in profile.kernels.values() for c in curves
        ],
        "calib_avg": [[k[0], v] for k, v in sorted(profile.calib_avg.samples)],
        "calib_max": [[k[0], k[1], v] for k, v in sorted(profile.calib_max.samples)],
    }


def dumps(profile: MachineProfile) -> str:
    return json.dumps(to_dict(profile), indent=2, allow_nan=False) + "\n"
