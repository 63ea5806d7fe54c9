"""Exhaustive design-space exploration over ``[N, K, L, M]``.

Every grid point is scheduled and costed on every workload. The objective is
the mean over workloads of GOPS / EPB; points whose peak power exceeds the
budget are kept in the output but never selected. Ties are broken by lower
peak power, then fewer ring-bank sites ``N*K*L*M``, then the smaller
``(N, K, L, M)`` tuple.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

from .devices import DeviceConfig
from .errors import ConstraintError
from .ir import ModelGraph
from .perf import peak_power_w, quick_report
from .schedule import ArchConfig, ScheduleOpts

DEFAULT_GRID = "n=4:36:4,k=1:8,l=1:16,m=1:8"
ALL_OPTS = ScheduleOpts(sparse=True, pipelined=True, power_gating=True)


def _parse_axis(name: str, text: str) -> tuple[int, ...]:
    try:
        if "|" in text:
            values = [int(v) for v in text.split("|")]
        elif ":" in text:
            parts = [int(v) for v in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            lo, hi = parts[0], parts[1]
            step = parts[2] if len(parts) == 3 else 1
            if step < 1:
                raise ValueError
            values = list(range(lo, hi + 1, step))
        else:
            values = [int(text)]
    except ValueError:
        raise ValueError(f"bad range for {name!r}: {text!r} (use lo:hi[:step], a|b|c or a value)") from None
    if not values or min(values) < 1:
        raise ValueError(f"range for {name!r} must be nonempty and positive, got {text!r}")
    return tuple(sorted(set(values)))


def parse_grid(text: str) -> dict[str, tuple[int, ...]]:
    """``"n=4:36:4,k=1:8,l=1:16,m=1:8"`` to per-axis value tuples (bounds inclusive)."""
    axes = {}
    for part in text.split(","):
        if "=" not in part:
            raise ValueError(f"grid term {part!r} is not axis=range")
        name, rng = (x.strip() for x in part.split("=", 1))
        name = name.lower()
        if name not in ("n", "k", "l", "m"):
            raise ValueError(f"unknown grid axis {name!r}; use n, k, l, m")
        axes[name] = _parse_axis(name, rng)
    if missing := {"n", "k", "l", "m"} - set(axes):
        raise ValueError(f"grid lacks axes {sorted(missing)}")
    return axes


@dataclass(frozen=True)
class SearchSpace:
    n: tuple[int, ...]
    k: tuple[int, ...]
    l: tuple[int, ...]  # noqa: E741
    m: tuple[int, ...]
    workloads: tuple[ModelGraph, ...]
    budget_w: float = 100.0
    weights: tuple[float, ...] | None = None  # per-workload objective weights, uniform if None

    def __post_init__(self):
        for name in ("n", "k", "l", "m"):
            values = getattr(self, name)
            if not values or min(values) < 1:
                raise ValueError(f"axis {name} must be a nonempty set of positive integers")
        if max(self.n) > 36:
            raise ConstraintError(f"N up to {max(self.n)} exceeds the 36 wavelengths a waveguide can carry")
        if not self.workloads:
            raise ValueError("search space needs at least one workload")
        if not self.budget_w > 0:
            raise ValueError("power budget must be > 0")
        if self.weights is not None and (len(self.weights) != len(self.workloads) or sum(self.weights) <= 0):
            raise ValueError("weights must match the workloads and have a positive sum")

    @classmethod
    def from_grid(cls, text: str, workloads, budget_w: float = 100.0, weights=None) -> "SearchSpace":
        axes = parse_grid(text)
        return cls(axes["n"], axes["k"], axes["l"], axes["m"], tuple(workloads), budget_w,
                   None if weights is None else tuple(weights))

    def configs(self):
        """Grid points in lexicographic ``(N, K, L, M)`` order."""
        for n, k, l, m in itertools.product(self.n, self.k, self.l, self.m):  # noqa: E741
            yield ArchConfig(n, k, l, m, power_budget_w=self.budget_w)

    def __len__(self):
        return len(self.n) * len(self.k) * len(self.l) * len(self.m)


@dataclass(frozen=True)
class DsePoint:
    config: ArchConfig
    gops: float  # mean over workloads
    epb: float  # mean over workloads, J/bit
    objective: float  # weighted mean of per-workload GOPS / EPB
    peak_power_w: float
    feasible: bool

    def rank_key(self):
        c = self.config
        return (-self.objective, self.peak_power_w, c.N * c.K * c.L * c.M, c.as_tuple())


@dataclass
class DseResult:
    best: DsePoint | None
    points: list = field(default_factory=list)

    @property
    def empty_feasible_set(self) -> bool:
        return self.best is None

    @property
    def n_feasible(self) -> int:
        return sum(p.feasible for p in self.points)


def evaluate_point(config: ArchConfig, workloads, devices: DeviceConfig = DeviceConfig(),
                   opts: ScheduleOpts = ALL_OPTS, weights=None, budget_w: float | None = None) -> DsePoint:
    reports = [quick_report(g, config, opts, devices) for g in workloads]
    w = [1.0] * len(reports) if weights is None else list(weights)
    total_w = sum(w)
    ratios = [r.gops / r.epb_j_per_bit for r in reports]
    objective = sum(wi * x for wi, x in zip(w, ratios)) / total_w
    peak = peak_power_w(config, opts.power_gating, devices)
    budget = config.power_budget_w if budget_w is None else budget_w
    return DsePoint(
        config=config,
        gops=sum(r.gops for r in reports) / len(reports),
        epb=sum(r.epb_j_per_bit for r in reports) / len(reports),
        objective=objective,
        peak_power_w=peak,
        feasible=peak <= budget,
    )


def best_of(points) -> DsePoint | None:
    feasible = [p for p in points if p.feasible]
    return min(feasible, key=DsePoint.rank_key) if feasible else None


def explore(space: SearchSpace, devices: DeviceConfig = DeviceConfig(), opts: ScheduleOpts = ALL_OPTS,
            progress=None) -> DseResult:
    """Evaluate every grid point; ``best`` is None when nothing fits the budget."""
    points = []
    for i, config in enumerate(space.configs()):
        points.append(evaluate_point(config, space.workloads, devices, opts, space.weights, space.budget_w))
        if progress is not None:
            progress(i + 1, len(space))
    return DseResult(best_of(points), points)


CSV_FIELDS = ("N", "K", "L", "M", "gops", "epb_j_per_bit", "objective", "peak_power_w", "feasible", "best")


def points_to_csv(result: DseResult, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for p in result.points:
        w.writerow([*p.config.as_tuple(), repr(p.gops), repr(p.epb), repr(p.objective),
                    repr(p.peak_power_w), int(p.feasible), int(p is result.best)])
    return buf.getvalue()
