"""Step-by-step schedule walker.

Replays each algorithm event by event (every shift, every collective step,
every kernel call) and folds the step times. It shares only the profile
lookups with the closed-form models, so it catches mis-transcribed sums and
off-by-one loop bounds in :mod:`dlaperf.algomodel`.

Overlapped regions are emitted as groups: member steps carry a group id and
a branch name, followed by one ``overlap-merge`` step holding the group's
contribution (the largest branch sum). Totals count ungrouped steps plus
one contribution per group.
"""

from __future__ import annotations

import csv
import io
import math
from contextlib import contextmanager
from typing import NamedTuple

from dlaperf.algomodel import DEFAULT_OPTIONS, ModelOptions, Scenario, check_scenario
from dlaperf.profile import MachineProfile

COMM, COMPUTE, MERGE = "comm", "compute", "overlap-merge"
PROLOGUE = -1


class Step(NamedTuple):
    iteration: int
    label: str
    kind: str
    seconds: float
    group: int | None = None
    branch: str | None = None


class StepTrace:
    def __init__(self, scenario: Scenario, steps: list[Step]):
        self.scenario = scenario
        self.steps = steps

    def __len__(self) -> int:
        return len(self.steps)

    def group_totals(self) -> dict[int, float]:
        branches: dict[int, dict[str, list[float]]] = {}
        for st in self.steps:
            if st.group is not None and st.kind != MERGE:
                branches.setdefault(st.group, {}).setdefault(st.branch, []).append(st.seconds)
        return {g: max(math.fsum(v) for v in b.values()) for g, b in branches.items()}

    @property
    def total_s(self) -> float:
        plain = [st.seconds for st in self.steps if st.group is None]
        return math.fsum(plain + list(self.group_totals().values()))

    def counted(self) -> list[Step]:
        """Steps whose seconds add up to the total (merge rows stand in for groups)."""
        return [st for st in self.steps if st.group is None or st.kind == MERGE]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "label", "kind", "seconds"])
        for st in self.steps:
            writer.writerow([st.iteration, st.label, st.kind, repr(st.seconds)])
        writer.writerow(["", "total", "", repr(self.total_s)])
        return buf.getvalue()


class _Walker:
    def __init__(self, profile: MachineProfile, sc: Scenario, options: ModelOptions):
        self.profile = profile
        self.sc = sc
        self.options = options
        self.steps: list[Step] = []
        self._group: int | None = None
        self._branch: str | None = None
        self._groups = 0
        self._latency = profile.latency_s
        self._beta = profile.inv_bandwidth_s_per_word
        self._factors: dict[tuple, float] = {}
        self._templates: dict[tuple, list] = {}

    # primitives
    def emit(self, it, label, kind, seconds):
        self.steps.append(Step(it, label, kind, seconds, self._group, self._branch))

    def transfer(self, it, label, w, d, p=None, scale=1.0):
        key = (p, d)
        factor = self._factors.get(key)
        if factor is None:
            factor = self.profile.c_avg(d) if p is None else self.profile.c_max(p, d)
            self._factors[key] = factor
        seconds = scale * factor * (self._latency + self._beta * w)
        self.steps.append(Step(it, label, COMM, seconds, self._group, self._branch))

    def kernel(self, it, label, name, dim, t, scale=1.0):
        self.emit(it, label, COMPUTE, scale * self.profile.t_rout(name, dim, t))

    @contextmanager
    def branch(self, name):
        self._branch = name
        yield
        self._branch = None

    @contextmanager
    def overlap(self, it, label):
        g = self._groups
        self._groups += 1
        self._group = g
        start = len(self.steps)
        yield
        self._group = None
        merged = StepTrace(self.sc, self.steps[start:]).group_totals().get(g, 0.0)
        self.steps.append(Step(it, label, MERGE, merged, g, None))

    # collectives, one step per round
    @staticmethod
    def rounds(q):
        k, n = 1, 0
        while k < q:
            k *= 2
            n += 1
        if k != q:
            raise ValueError(f"q must be a power of two, got {q}")
        return n

    def last_size_multiplier(self, q):
        return self.sc.t if self.options.literal_thread_term else q

    def _rounds_of(self, kind, prefix, p, q, w, d, sync_p):
        """(label, unscaled seconds) for each round of one collective, memoised per walk."""
        key = (kind, prefix, p, q, w, d, sync_p)
        cached = self._templates.get(key)
        if cached is not None:
            return cached
        n = self.rounds(q)
        out = []
        for i in range(n):
            last = i == n - 1
            if kind == "halving":
                size = w * (self.last_size_multiplier(q) if last else q) / 2**i
                sync = p if last else None
            else:
                size = (w / q) * 2**i
                sync = sync_p if last else None
            factor = self.profile.c_avg(2**i * d) if sync is None else self.profile.c_max(sync, 2**i * d)
            out.append((f"{prefix}/{kind}[{i}]", factor * (self._latency + self._beta * size)))
        self._templates[key] = out
        return out

    def _emit_rounds(self, it, rounds, scale):
        append, g, b = self.steps.append, self._group, self._branch
        for label, seconds in rounds:
            append(Step(it, label, COMM, scale * seconds, g, b))

    def red_sca(self, it, prefix, p, q, w, d, scale=1.0):
        self._emit_rounds(it, self._rounds_of("halving", prefix, p, q, w, d, None), scale)

    def gather(self, it, prefix, q, w, d, scale=1.0, sync_p=None):
        self._emit_rounds(it, self._rounds_of("tree", prefix, None, q, w, d, sync_p), scale)

    def bcast(self, it, prefix, p, q, w, d, scale=1.0, sync=False):
        self.red_sca(it, f"{prefix}/scatter", p, q, w, d, scale)
        self.gather(it, f"{prefix}/allgather", q, w, d, scale, sync_p=p if sync else None)


def _cannon(wk: _Walker) -> None:
    sc = wk.sc
    p, t, s = sc.p, sc.t, sc.grid
    bs = sc.block
    w = bs * bs
    two_d = not sc.is_25d
    sync_p = p if two_d else None

    def shifts(it):
        wk.transfer(it, "shift_row", w, 1, p=sync_p)
        wk.transfer(it, "shift_col", w, s, p=sync_p)

    if two_d:
        # the initial skew is one more shift pair ahead of the first product
        loop = range(s)
    else:
        if sc.c == 1:
            wk.transfer(PROLOGUE, "skew_row", w, 1)
            wk.transfer(PROLOGUE, "skew_col", w, s)
        else:
            far = (sc.c - 1) * p // sc.c
            wk.transfer(PROLOGUE, "replicate_A", w, far, p=p)
            wk.transfer(PROLOGUE, "replicate_B", w, far, p=p)
        loop = range(s - 1)

    if not sc.overlap:
        for it in loop:
            if two_d:
                shifts(it)
            wk.kernel(it, "dgemm", "dgemm", bs, t)
            if not two_d:
                shifts(it)
        if not two_d:
            wk.kernel(s - 1, "dgemm", "dgemm", bs, t)
    else:
        first = 0 if two_d else None
        for it in loop:
            if it == first:
                shifts(it)
                wk.kernel(it, "dgemm", "dgemm", bs, t)
                continue
            with wk.overlap(it, "overlap"):
                with wk.branch(COMM):
                    shifts(it)
                with wk.branch(COMPUTE):
                    wk.kernel(it, "dgemm", "dgemm", bs, t)
        if not two_d:
            wk.kernel(s - 1, "dgemm", "dgemm", bs, t)

    if not two_d:
        q, dist = sc.c, p // sc.c
        wk.red_sca(s, "reduce/scatter", p, q, w, dist)
        wk.gather(s, "reduce/gather", q, w, dist)


def _trsm(wk: _Walker) -> None:
    sc = wk.sc
    p, r, c, s = sc.p, sc.r, sc.c, sc.grid
    bs = sc.block
    w = bs * bs
    n_iter = r * s
    kt = sc.t - 1 if sc.overlap else sc.t
    layer_share = 1.0 / c

    if sc.is_25d:
        for k in range(r * r):
            wk.bcast(PROLOGUE, f"replicate_U[{k}]", p, c, w, p // c, scale=0.75)
            wk.red_sca(PROLOGUE, f"scatter_X[{k}]", p, c, w / c, p // c)
    u_ranks = s
    if sc.is_25d and wk.options.full_grid_ubcast and not sc.overlap:
        u_ranks = math.isqrt(p)

    if sc.overlap:
        for j in range(r):
            wk.bcast(PROLOGUE, f"bcast_U_first[{j}]", p, s, w, s, sync=True)

    for i in range(n_iter):
        remaining = (n_iter - i) / s
        trailing = (n_iter - i - 1) / s
        if not sc.overlap:
            wk.bcast(i, "bcast_U", p, u_ranks, w, s, scale=remaining, sync=True)
        for j in range(r):
            wk.kernel(i, f"dtrsm[{j}]", "dtrsm", bs, kt, scale=layer_share)
            wk.bcast(i, f"bcast_X[{j}]", p, s, w, 1, scale=layer_share)
        if not sc.overlap:
            for j in range(r):
                wk.kernel(i, f"dgemm[{j}]", "dgemm", bs, kt, scale=trailing * layer_share)
        else:
            with wk.overlap(i, "overlap"):
                with wk.branch(COMM):
                    wk.bcast(i, "bcast_U", p, s, w, s, scale=trailing, sync=True)
                with wk.branch(COMPUTE):
                    for j in range(r):
                        wk.kernel(i, f"dgemm[{j}]", "dgemm", bs, kt, scale=trailing * layer_share)

    if not sc.overlap:
        wk.bcast(n_iter, "bcast_U", p, s, w, s, sync=True)
    for j in range(r):
        wk.kernel(n_iter, f"dtrsm[{j}]", "dtrsm", bs, kt, scale=layer_share)
    if sc.is_25d:
        for k in range(r * r):
            wk.gather(n_iter, f"gather_X[{k}]", c, w, p // c)


def trace(profile: MachineProfile, sc: Scenario, options: ModelOptions | None = None) -> StepTrace:
    """Walk the schedule of ``sc`` and return every timed step."""
    options = options or DEFAULT_OPTIONS
    check_scenario(sc, options)
    wk = _Walker(profile, sc, options)
    if sc.p == 1:
        name = "dgemm" if sc.algorithm == "cannon" else "dtrsm"
        wk.kernel(0, name, name, sc.n, sc.t)
    elif sc.algorithm == "cannon":
        _cannon(wk)
    else:
        _trsm(wk)
    return StepTrace(sc, wk.steps)
