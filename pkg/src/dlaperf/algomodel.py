"""End-to-end cost models for Cannon's matrix multiplication and the
triangular solve, each in 2D and 2.5D form with and without overlap.

Every model returns a :class:`Prediction` whose phases add up to the total.
The models are assembled from the primitive costs on :class:`Costs`; tests
substitute a stub ``Costs`` subclass to pin individual primitives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from dlaperf import commodel
from dlaperf.commodel import is_power_of_two, isqrt_exact
from dlaperf.compmodel import t_square
from dlaperf.profile import MachineProfile

ALGORITHMS = ("cannon", "trsm")
# Order doubles as the tie-break order: less memory first, then no overlap.
VARIANTS = ("2d", "2d_ovlp", "25d", "25d_ovlp")

# Fraction of the replication broadcast charged in the 2.5D TRSM prologue.
TRSM_REPL_COEFF = 3.0 / 4.0


class ScenarioError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ModelOptions:
    """Switches between two readings of terms whose intent is ambiguous.

    ``literal_thread_term``: the last reduce-scatter step moves
    ``w * t / 2**(log2 q - 1)`` words with t the thread count, instead of q.
    ``full_grid_ubcast``: the 2.5D TRSM loop broadcasts U over ``sqrt(p)``
    ranks instead of the per-layer ``sqrt(p/c)``.
    """

    literal_thread_term: bool = False
    full_grid_ubcast: bool = False


DEFAULT_OPTIONS = ModelOptions()


@dataclass(frozen=True)
class Scenario:
    algorithm: str
    variant: str
    n: int
    p: int
    c: int = 1
    r: int = 1
    t: int = 6

    @property
    def is_25d(self) -> bool:
        return self.variant.startswith("25d")

    @property
    def overlap(self) -> bool:
        return self.variant.endswith("_ovlp")

    @property
    def grid(self) -> int | None:
        """Side of the per-layer process grid."""
        if self.c < 1 or self.p % self.c:
            return None
        return isqrt_exact(self.p // self.c)

    @property
    def block(self) -> int | None:
        g = self.grid
        if g is None:
            return None
        div = g * (self.r if self.algorithm == "trsm" else 1)
        return self.n // div if self.n % div == 0 else None


@dataclass(frozen=True)
class Prediction:
    scenario: Scenario
    total_s: float
    phases: tuple[tuple[str, float], ...]
    flops: float
    percent_peak: float


def scenario_problems(sc: Scenario, options: ModelOptions = DEFAULT_OPTIONS) -> list[str]:
    out = []
    if sc.algorithm not in ALGORITHMS:
        out.append(f"algorithm must be one of {ALGORITHMS}, got {sc.algorithm!r}")
    if sc.variant not in VARIANTS:
        out.append(f"variant must be one of {VARIANTS}, got {sc.variant!r}")
    for name in ("n", "p", "c", "r", "t"):
        value = getattr(sc, name)
        if not isinstance(value, int) or value < 1:
            out.append(f"{name} must be an integer >= 1, got {value!r}")
    if out:
        return out
    if sc.algorithm == "cannon" and sc.r != 1:
        out.append(f"r must be 1 for cannon, got {sc.r}")
    if not sc.is_25d and sc.c != 1:
        out.append(f"c must be 1 for 2D variants, got {sc.c}")
    if sc.p % sc.c:
        out.append(f"c={sc.c} does not divide p={sc.p}")
        return out
    g = sc.grid
    if g is None:
        what = "p" if sc.c == 1 else "p/c"
        out.append(f"{what}={sc.p // sc.c} is not a perfect square")
        return out
    if sc.algorithm == "trsm" and not is_power_of_two(g):
        out.append(f"grid side sqrt(p/c)={g} is not a power of two")
    if sc.is_25d and not is_power_of_two(sc.c):
        out.append(f"c={sc.c} is not a power of two")
    if sc.algorithm == "trsm" and sc.is_25d and options.full_grid_ubcast:
        full = isqrt_exact(sc.p)
        if full is None or not is_power_of_two(full):
            out.append(f"sqrt(p) must be a power of two with full_grid_ubcast, p={sc.p}")
    if sc.block is None:
        div = g * (sc.r if sc.algorithm == "trsm" else 1)
        out.append(f"block size n/{div} is not integral for n={sc.n}")
    if sc.algorithm == "trsm" and sc.overlap and sc.t < 2:
        out.append("overlap requires a dedicated communication thread (t >= 2)")
    return out


def check_scenario(sc: Scenario, options: ModelOptions = DEFAULT_OPTIONS) -> Scenario:
    problems = scenario_problems(sc, options)
    if problems:
        raise ScenarioError(problems)
    return sc


class Costs:
    """Primitive cost lookups for one profile under one set of model options."""

    def __init__(self, profile: MachineProfile, options: ModelOptions = DEFAULT_OPTIONS,
                 threads: int | None = None):
        self.profile = profile
        self.options = options
        self._m = threads if options.literal_thread_term else None

    def for_threads(self, t: int) -> "Costs":
        if not self.options.literal_thread_term:
            return self
        return type(self)(self.profile, self.options, t)

    def comm(self, w, d):
        return commodel.t_comm(self.profile, w, d)

    def comm_sync(self, p, w, d):
        return commodel.t_comm_sync(self.profile, p, w, d)

    def ini_repl(self, p, w, c):
        return commodel.t_ini_repl(self.profile, p, w, c)

    def reduce(self, p, q, w, d):
        return commodel.t_reduce(self.profile, p, q, w, d, self._m)

    def scatter_sync(self, p, q, w, d):
        return commodel.t_scatter_sync(self.profile, p, q, w, d, self._m)

    def gather(self, q, w, d):
        return commodel.t_gather(self.profile, q, w, d)

    def bcast(self, p, q, w, d):
        return commodel.t_bcast(self.profile, p, q, w, d, self._m)

    def bcast_sync(self, p, q, w, d):
        return commodel.t_bcast_sync(self.profile, p, q, w, d, self._m)

    def kernel(self, name, dim, t):
        return t_square(self.profile, name, dim, t)


def _costs(source, sc: Scenario, options) -> Costs:
    if isinstance(source, Costs):
        return source.for_threads(sc.t)
    return Costs(source, options or DEFAULT_OPTIONS, sc.t)


def flops_of(sc: Scenario) -> float:
    n = float(sc.n)
    return 2.0 * n**3 if sc.algorithm == "cannon" else n**3


def percent_peak(profile: MachineProfile, sc: Scenario, total_s: float) -> float:
    if not total_s > 0:
        raise ValueError(f"total time must be > 0, got {total_s}")
    machine = sc.p * profile.cores_per_process * profile.peak_flops_per_core
    return flops_of(sc) / (total_s * machine) * 100.0


def _finish(costs: Costs, sc: Scenario, phases) -> Prediction:
    phases = tuple(phases)
    total = math.fsum(v for _, v in phases)
    return Prediction(sc, total, phases, flops_of(sc), percent_peak(costs.profile, sc, total))


def _local(costs: Costs, sc: Scenario) -> Prediction:
    # one process: no shifts, no collectives, one kernel call on the whole matrix
    kernel = "dgemm" if sc.algorithm == "cannon" else "dtrsm"
    return _finish(costs, sc, [(kernel, costs.kernel(kernel, sc.n, sc.t))])


def _prepare(source, sc, options, algorithm, variants):
    options = source.options if isinstance(source, Costs) else (options or DEFAULT_OPTIONS)
    check_scenario(sc, options)
    if sc.algorithm != algorithm or sc.variant not in variants:
        raise ScenarioError([f"scenario is {sc.algorithm}/{sc.variant}, expected {algorithm}/{'|'.join(variants)}"])
    return _costs(source, sc, options)


# -- Cannon ------------------------------------------------------------------

def cannon_2d(source, sc: Scenario, options: ModelOptions | None = None) -> Prediction:
    costs = _prepare(source, sc, options, "cannon", ("2d",))
    if sc.p == 1:
        return _local(costs, sc)
    s, w = sc.grid, sc.block**2
    row = costs.comm_sync(sc.p, w, 1)
    col = costs.comm_sync(sc.p, w, s)
    mm = costs.kernel("dgemm", sc.block, sc.t)
    return _finish(costs, sc, [("row_shifts", s * row), ("col_shifts", s * col), ("dgemm", s * mm)])


def cannon_2d_ovlp(source, sc: Scenario, options: ModelOptions | None = None) -> Prediction:
    costs = _prepare(source, sc, options, "cannon", ("2d_ovlp",))
    if sc.p == 1:
        return _local(costs, sc)
    s, w = sc.grid, sc.block**2
    shifts = costs.comm_sync(sc.p, w, 1) + costs.comm_sync(sc.p, w, s)
    mm = costs.kernel("dgemm", sc.block, sc.t)
    return _finish(costs, sc, [
        ("first_shifts", shifts),
        ("dgemm", mm),
        ("overlapped_loop", (s - 1) * max(shifts, mm)),
    ])


def _cannon_25d_setup(costs: Costs, sc: Scenario, w: float) -> tuple[str, float]:
    if sc.c == 1:
        # no layers to fill, but the blocks still need their initial skew
        return "initial_shifts", costs.comm(w, 1) + costs.comm(w, sc.grid)
    return "replication", costs.ini_repl(sc.p, w, sc.c)


def cannon_25d(source, sc: Scenario, options: ModelOptions | None = None) -> Prediction:
    costs = _prepare(source, sc, options, "cannon", ("25d",))
    if sc.p == 1:
        return _local(costs, sc)
    s, w = sc.grid, sc.block**2
    row = costs.comm(w, 1)
    col = costs.comm(w, s)
    mm = costs.kernel("dgemm", sc.block, sc.t)
    return _finish(costs, sc, [
        _cannon_25d_setup(costs, sc, w),
        ("row_shifts", (s - 1) * row),
        ("col_shifts", (s - 1) * col),
        ("dgemm", s * mm),
        ("reduce", costs.reduce(sc.p, sc.c, w, sc.p // sc.c)),
    ])


def cannon_25d_ovlp(source, sc: Scenario, options: ModelOptions | None = None) -> Prediction:
    costs = _prepare(source, sc, options, "cannon", ("25d_ovlp",))
    if sc.p == 1:
        return _local(costs, sc)
    s, w = sc.grid, sc.block**2
    shifts = costs.comm(w, 1) + costs.comm(w, s)
    mm = costs.kernel("dgemm", sc.block, sc.t)
    return _finish(costs, sc, [
        _cannon_25d_setup(costs, sc, w),
        ("overlapped_loop", (s - 1) * max(shifts, mm)),
        ("dgemm", mm),
        ("reduce", costs.reduce(sc.p, sc.c, w, sc.p // sc.c)),
    ])


# -- TRSM ----------------------------------------------------------------------
#
# The loop runs N = r * s iterations over an s x s grid. Iteration i broadcasts
# U with weight (N - i) / s and updates with weight (N - i - 1) / s; the
# closed forms below use the summed weights.

def _weights(r: int, s: int) -> tuple[int, float, float]:
    n_iter = r * s
    return n_iter, n_iter * (n_iter + 1) / (2 * s), n_iter * (n_iter - 1) / (2 * s)


def trsm_2d(source, sc: Scenario, options: ModelOptions | None = None) -> Prediction:
    costs = _prepare(source, sc, options, "trsm", ("2d",))
    if sc.p == 1:
        return _local(costs, sc)
    s, bs, r, p = sc.grid, sc.block, sc.r, sc.p
    w = bs * bs
    n_iter, w_bcast, w_update = _weights(r, s)
    bcast_u = costs.bcast_sync(p, s, w, s)
    solve = costs.kernel("dtrsm", bs, sc.t)
    bcast_x = costs.bcast(p, s, w, 1)
    update = costs.kernel("dgemm", bs, sc.t)
    return _finish(costs, sc, [
        ("bcast_U", w_bcast * bcast_u + bcast_u),
        ("dtrsm", n_iter * r * solve + r * solve),
        ("bcast_X", n_iter * r * bcast_x),
        ("dgemm", w_update * r * update),
    ])


def trsm_2d_ovlp(source, sc: Scenario, options: ModelOptions | None = None) -> Prediction:
    costs = _prepare(source, sc, options, "trsm", ("2d_ovlp",))
    if sc.p == 1:
        return _local(costs, sc)
    s, bs, r, p = sc.grid, sc.block, sc.r, sc.p
    w = bs * bs
    n_iter, _, w_update = _weights(r, s)
    bcast_u = costs.bcast_sync(p, s, w, s)
    solve = costs.kernel("dtrsm", bs, sc.t - 1)
    bcast_x = costs.bcast(p, s, w, 1)
    update = costs.kernel("dgemm", bs, sc.t - 1)
    return _finish(costs, sc, [
        ("bcast_U_first", r * bcast_u),
        ("dtrsm", n_iter * r * solve + r * solve),
        ("bcast_X", n_iter * r * bcast_x),
        ("overlapped_update", w_update * max(bcast_u, r * update)),
    ])


def _trsm_25d_prologue(costs: Costs, sc: Scenario, w: float) -> tuple[str, float]:
    p, c, r = sc.p, sc.c, sc.r
    repl = TRSM_REPL_COEFF * costs.bcast(p, c, w, p // c) + costs.scatter_sync(p, c, w / c, p // c)
    return "replication", r * r * repl


def trsm_25d(source, sc: Scenario, options: ModelOptions | None = None) -> Prediction:
    costs = _prepare(source, sc, options, "trsm", ("25d",))
    if sc.p == 1:
        return _local(costs, sc)
    s, bs, r, p, c = sc.grid, sc.block, sc.r, sc.p, sc.c
    w = bs * bs
    per_layer = r / c
    n_iter, w_bcast, w_update = _weights(r, s)
    u_ranks = isqrt_exact(p) if costs.options.full_grid_ubcast else s
    bcast_u_loop = costs.bcast_sync(p, u_ranks, w, s)
    bcast_u_last = costs.bcast_sync(p, s, w, s)
    solve = costs.kernel("dtrsm", bs, sc.t)
    bcast_x = costs.bcast(p, s, w, 1)
    update = costs.kernel("dgemm", bs, sc.t)
    return _finish(costs, sc, [
        _trsm_25d_prologue(costs, sc, w),
        ("bcast_U", w_bcast * bcast_u_loop + bcast_u_last),
        ("dtrsm", n_iter * per_layer * solve + per_layer * solve),
        ("bcast_X", n_iter * per_layer * bcast_x),
        ("dgemm", w_update * per_layer * update),
        ("gather", r * r * costs.gather(c, w, p // c)),
    ])


def trsm_25d_ovlp(source, sc: Scenario, options: ModelOptions | None = None) -> Prediction:
    costs = _prepare(source, sc, options, "trsm", ("25d_ovlp",))
    if sc.p == 1:
        return _local(costs, sc)
    s, bs, r, p, c = sc.grid, sc.block, sc.r, sc.p, sc.c
    w = bs * bs
    per_layer = r / c
    n_iter, _, w_update = _weights(r, s)
    bcast_u = costs.bcast_sync(p, s, w, s)
    solve = costs.kernel("dtrsm", bs, sc.t - 1)
    bcast_x = costs.bcast(p, s, w, 1)
    update = costs.kernel("dgemm", bs, sc.t - 1)
    return _finish(costs, sc, [
        _trsm_25d_prologue(costs, sc, w),
        ("bcast_U_first", r * bcast_u),
        ("dtrsm", n_iter * per_layer * solve + per_layer * solve),
        ("bcast_X", n_iter * per_layer * bcast_x),
        ("overlapped_update", w_update * max(bcast_u, per_layer * update)),
        ("gather", r * r * costs.gather(c, w, p // c)),
    ])


MODELS = {
    ("cannon", "2d"): cannon_2d,
    ("cannon", "2d_ovlp"): cannon_2d_ovlp,
    ("cannon", "25d"): cannon_25d,
    ("cannon", "25d_ovlp"): cannon_25d_ovlp,
    ("trsm", "2d"): trsm_2d,
    ("trsm", "2d_ovlp"): trsm_2d_ovlp,
    ("trsm", "25d"): trsm_25d,
    ("trsm", "25d_ovlp"): trsm_25d_ovlp,
}


def predict(source, sc: Scenario, options: ModelOptions | None = None) -> Prediction:
    try:
        model = MODELS[(sc.algorithm, sc.variant)]
    except KeyError:
        check_scenario(sc, options or DEFAULT_OPTIONS)
        raise
    return model(source, sc, options)


# -- variant ranking -----------------------------------------------------------

def layer_choices(algorithm: str, n: int, p: int, r: int = 1, t: int = 6,
                  variant: str = "25d", options: ModelOptions = DEFAULT_OPTIONS) -> list[int]:
    """Replication counts c >= 2 that give a valid 2.5D scenario."""
    out = []
    c = 2
    while c <= p:
        if not scenario_problems(Scenario(algorithm, variant, n, p, c, r, t), options):
            out.append(c)
        c *= 2
    return out


@dataclass
class RankCell:
    n: int
    p: int
    predictions: dict[str, Prediction | None] = field(default_factory=dict)
    invalid: dict[str, str] = field(default_factory=dict)

    @property
    def winner(self) -> str | None:
        best = None
        for variant in VARIANTS:
            pred = self.predictions.get(variant)
            if pred is None:
                continue
            if best is None or pred.total_s < self.predictions[best].total_s:
                best = variant
        return best


def best_layers(source, algorithm, variant, n, p, r, t, options=None) -> Prediction | None:
    best = None
    for c in layer_choices(algorithm, n, p, r, t, variant, options or DEFAULT_OPTIONS):
        pred = predict(source, Scenario(algorithm, variant, n, p, c, r, t), options)
        if best is None or pred.total_s < best.total_s:
            best = pred
    return best


def rank_cell(source, algorithm: str, n: int, p: int, r: int = 1, t: int = 6,
              layers: list[int] | None = None, options: ModelOptions | None = None) -> RankCell:
    """Evaluate all four variants for one (n, p); 2.5D at the fastest valid c.

    ``layers`` restricts the c values tried for 2.5D variants.
    """
    cell = RankCell(n, p)
    for variant in VARIANTS:
        if variant.startswith("25d"):
            reasons: list[str] = []
            if layers is None:
                pred = best_layers(source, algorithm, variant, n, p, r, t, options)
            else:
                pred = None
                for c in layers:
                    sc = Scenario(algorithm, variant, n, p, c, r, t)
                    problems = scenario_problems(sc, options or DEFAULT_OPTIONS)
                    if problems:
                        reasons.append(f"c={c}: " + "; ".join(problems))
                        continue
                    cand = predict(source, sc, options)
                    if pred is None or cand.total_s < pred.total_s:
                        pred = cand
            if pred is None:
                cell.invalid[variant] = " | ".join(reasons) or "no valid layer count"
            cell.predictions[variant] = pred
        else:
            sc = Scenario(algorithm, variant, n, p, 1, r, t)
            problems = scenario_problems(sc, options or DEFAULT_OPTIONS)
            if problems:
                cell.invalid[variant] = "; ".join(problems)
                cell.predictions[variant] = None
            else:
                cell.predictions[variant] = predict(source, sc, options)
    return cell
