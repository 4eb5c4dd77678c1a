"""Multi-start search: random seeds, cheap screening, local simplex refinement.

No Schroedinger integration happens here.  Every candidate is scored with
the STA map alone, through the fused kernel in :mod:`sta_lambda.kernels`.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .cost import CostConfig, CostReport, cost
from .errors import SeedRejectionError
from .model import PulseParameters, SystemConfig, normalized_shape, shape_grid

log = logging.getLogger(__name__)

SUCCESS_COST = float(np.exp(0.8))
_DRAW_CHUNK = 1024


@dataclass(frozen=True)
class SeedBox:
    """Sampling ranges; centre and width limits are fractions of ``T``."""

    a_lo: float = -1.0
    a_hi: float = 1.0
    t0_lo: float = -0.5
    t0_hi: float = 0.5
    w_lo: float = 1.0 / 50.0
    w_hi: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.a_lo < self.a_hi and self.t0_lo < self.t0_hi
                and 0 < self.w_lo < self.w_hi):
            raise ValueError("seed box needs lo < hi for every range and w_lo > 0")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")

    def bounds(self, duration: float, n_gaussians: int):
        """Lower and upper corners of the box as flat SI vectors."""
        n = n_gaussians
        lo = np.concatenate([np.full(n, self.a_lo), np.full(n, self.t0_lo * duration),
                             np.full(n, self.w_lo * duration)])
        hi = np.concatenate([np.full(n, self.a_hi), np.full(n, self.t0_hi * duration),
                             np.full(n, self.w_hi * duration)])
        return lo, hi

    def contains(self, params: PulseParameters) -> bool:
        lo, hi = self.bounds(params.duration, params.n_gaussians)
        v = params.to_vector()
        return bool(np.all(v >= lo) and np.all(v <= hi))


def draw_seed_vectors(box: SeedBox, count: int, duration: float, n_gaussians: int,
                      grid_points: int = 2001):
    """Uniform draws from ``box`` with degenerate shapes resampled.

    Draws are taken in fixed-size chunks, so the accepted sequence for a given
    ``rng_seed`` does not depend on ``count``.  Returns ``(vectors, rejected)``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(int(box.rng_seed))
    lo, hi = box.bounds(duration, n_gaussians)
    s = shape_grid(duration, grid_points)
    n = n_gaussians
    kept, rejected, drawn, total = [], 0, 0, 0
    while total < count:
        X = rng.uniform(lo, hi, size=(_DRAW_CHUNK, lo.size))
        ok = normalized_shape(s, X[:, :n], X[:, n:2 * n], X[:, 2 * n:], duration)[3]
        good = X[ok]
        need = count - total
        if good.shape[0] > need:
            # only count draws up to the last accepted one
            last = np.flatnonzero(ok)[need - 1]
            good = good[:need]
            ok = ok[: last + 1]
        kept.append(good)
        total += good.shape[0]
        rejected += int((~ok).sum())
        drawn += ok.size
        if drawn >= 20 and rejected > 0.5 * drawn:
            raise SeedRejectionError(
                f"{rejected} of {drawn} draws were degenerate (> 50%)"
            )
    return np.concatenate(kept)[:count], rejected


def generate_seeds(box: SeedBox, count: int, duration: float, n_gaussians: int,
                   grid_points: int = 2001) -> list[PulseParameters]:
    """Deterministic list of ``count`` non-degenerate random parameter sets."""
    X, rejected = draw_seed_vectors(box, count, duration, n_gaussians, grid_points)
    if rejected:
        log.debug("resampled %d degenerate seeds", rejected)
    return [PulseParameters.from_vector(x, duration) for x in X]


@dataclass
class ScreenResult:
    """Lowest-cost seeds in ascending order, plus the number of failed seeds."""

    entries: list[tuple[PulseParameters, CostReport]]
    n_failed: int
    n_scored: int
    median_C: float = float("nan")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


def screen(seeds: Sequence[PulseParameters], cfg: SystemConfig, keep: int,
           cost_cfg: CostConfig = CostConfig()) -> ScreenResult:
    """Score every seed with the STA map and keep the ``keep`` cheapest.

    Seeds whose reference pulses fail validation (boundary condition, singular
    mixing angle, non-finite output) are counted in ``n_failed`` and skipped.
    """
    seeds = list(seeds)
    if not 1 <= keep <= len(seeds):
        raise ValueError(f"keep must lie in [1, {len(seeds)}]")
    entries: list[tuple[PulseParameters, CostReport]] = []
    failed = 0
    by_T: dict[float, list[int]] = {}
    for i, p in enumerate(seeds):
        by_T.setdefault(p.duration, []).append(i)
    costs = np.full(len(seeds), np.inf)
    peaks = np.full(len(seeds), np.nan)
    qs = np.full(len(seeds), np.nan)
    for T, idx in by_T.items():
        X = np.array([seeds[i].to_vector() for i in idx])
        p, q, ok = kernels.candidate_scores(X, T, cfg)
        failed += int((~ok).sum())
        sel = np.asarray(idx)[ok]
        peaks[sel], qs[sel] = p[ok], q[ok]
        costs[sel] = cost(p[ok], q[ok], cost_cfg)
    order = np.argsort(costs, kind="stable")
    for i in order[:keep]:
        if not np.isfinite(costs[i]):
            break
        entries.append((seeds[i], CostReport(float(peaks[i]), float(qs[i]),
                                             float(costs[i]), seeds[i])))
    if failed:
        log.info("screening: %d of %d seeds failed validation", failed, len(seeds))
    valid = costs[np.isfinite(costs)]
    median = float(np.median(valid)) if valid.size else float("nan")
    return ScreenResult(entries, failed, len(seeds), median)


@dataclass
class OptimizationTrace:
    """Best-so-far cost after every cost evaluation of a local search."""

    C: np.ndarray
    omega_peak: np.ndarray
    q: np.ndarray
    best: CostReport
    stalled: bool = False

    @property
    def iterations(self) -> np.ndarray:
        return np.arange(1, len(self.C) + 1)

    def export_columns(self) -> dict[str, np.ndarray]:
        return {"iteration": self.iterations, "C": self.C,
                "omega_peak": self.omega_peak, "q": self.q}


class _BudgetExhausted(Exception):
    pass


def _reflect(u):
    """Fold unit-box coordinates back inside ``[0, 1]`` by mirror reflection."""
    r = np.mod(u, 2.0)
    return np.where(r > 1.0, 2.0 - r, r)


@dataclass
class _Objective:
    lo: np.ndarray
    span: np.ndarray
    duration: float
    cfg: SystemConfig
    cost_cfg: CostConfig
    budget: int
    best_C: float = np.inf
    best_x: np.ndarray | None = None
    best_peak: float = np.nan
    best_q: float = np.nan
    history: list = field(default_factory=list)

    def __call__(self, u):
        if len(self.history) >= self.budget:
            raise _BudgetExhausted
        x = self.lo + _reflect(np.asarray(u)) * self.span
        peak, q, ok = kernels.candidate_score(x, self.duration, self.cfg)
        C = cost(peak, q, self.cost_cfg) if ok else self.cost_cfg.c_max
        if C < self.best_C:
            self.best_C, self.best_x, self.best_peak, self.best_q = C, x, peak, q
        self.history.append((self.best_C, self.best_peak, self.best_q))
        return C


def local_minimize(start: PulseParameters, cfg: SystemConfig, budget: int = 2000,
                   box: SeedBox = SeedBox(), cost_cfg: CostConfig = CostConfig(),
                   initial_step: float = 0.1) -> OptimizationTrace:
    """Nelder-Mead with restarts over the flat control vector.

    The search runs in unit-box coordinates; points leaving the box are
    mirrored back inside before scoring.  Once a simplex run converges, a
    fresh simplex is built around the best point until ``budget`` cost
    evaluations are spent.  A restart that brings no improvement ends the
    search early and marks the trace ``stalled``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not box.contains(start):
        raise ValueError("start parameters lie outside the seed box")
    T = start.duration
    lo, hi = box.bounds(T, start.n_gaussians)
    obj = _Objective(lo, hi - lo, T, cfg, cost_cfg, budget)
    u = (start.to_vector() - lo) / (hi - lo)
    stalled = False
    try:
        obj(u)
        while len(obj.history) < budget:
            before = obj.best_C
            u = (obj.best_x - lo) / (hi - lo) if obj.best_x is not None else u
            simplex = np.vstack([u, u + initial_step * np.eye(u.size)])
            # step inward for coordinates sitting on the upper face
            simplex[1:] = np.where(simplex[1:] > 1.0, u - initial_step * np.eye(u.size),
                                   simplex[1:])
            minimize(obj, u, method="Nelder-Mead",
                     options={"initial_simplex": simplex, "maxfev": budget,
                              "xatol": 1e-7, "fatol": 1e-10, "adaptive": True})
            if not obj.best_C < before:
                stalled = True
                log.debug("local search stalled at C = %.6g", obj.best_C)
                break
    except _BudgetExhausted:
        pass
    hist = np.array(obj.history)
    if obj.best_x is None:
        best_params, peak, q = start, np.nan, np.nan
    else:
        best_params = PulseParameters.from_vector(obj.best_x, T)
        peak, q = obj.best_peak, obj.best_q
    report = CostReport(float(peak), float(q), float(obj.best_C), best_params)
    return OptimizationTrace(hist[:, 0], hist[:, 1], hist[:, 2], report, stalled)


def worker_count() -> int:
    """Process count for independent local searches (``STA_THREADS``)."""
    try:
        return max(1, int(os.environ.get("STA_THREADS", "1")))
    except ValueError:
        return 1


def _minimize_job(args):
    start, cfg, budget, box, cost_cfg = args
    return local_minimize(start, cfg, budget, box, cost_cfg)


def minimize_many(starts: Iterable[PulseParameters], cfg: SystemConfig, budget: int,
                  box: SeedBox = SeedBox(), cost_cfg: CostConfig = CostConfig(),
                  workers: int | None = None) -> list[OptimizationTrace]:
    """Run :func:`local_minimize` on every start; output order follows input."""
    jobs = [(s, cfg, budget, box, cost_cfg) for s in starts]
    workers = worker_count() if workers is None else workers
    if workers == 1 or len(jobs) < 2:
        return [_minimize_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_minimize_job, jobs, chunksize=1))


@dataclass(frozen=True)
class PipelineConfig:
    system: SystemConfig = SystemConfig()
    cost: CostConfig = CostConfig()
    box: SeedBox = SeedBox()
    n_gaussians: int = 4
    n_seeds: int = 100_000
    keep: int = 100
    budget: int = 2000

    def __post_init__(self):
        if self.n_gaussians < 0 or self.n_seeds < 1 or self.budget < 1:
            raise ValueError("n_gaussians >= 0, n_seeds >= 1 and budget >= 1 required")
        if not 1 <= self.keep <= self.n_seeds:
            raise ValueError("keep must lie in [1, n_seeds]")


@dataclass
class DurationResult:
    duration: float
    screened: ScreenResult
    traces: list[OptimizationTrace]

    @property
    def best(self) -> CostReport:
        return min((t.best for t in self.traces), key=lambda r: r.C)


def optimize_duration(duration: float, pipe: PipelineConfig) -> DurationResult:
    """Screen ``pipe.n_seeds`` seeds and locally optimise the ``pipe.keep`` best."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    seeds = generate_seeds(pipe.box, pipe.n_seeds, duration, pipe.n_gaussians,
                           pipe.system.grid_points)
    screened = screen(seeds, pipe.system, pipe.keep, pipe.cost)
    if not len(screened):
        raise RuntimeError("no seed passed validation")
    traces = minimize_many([p for p, _ in screened], pipe.system, pipe.budget,
                           pipe.box, pipe.cost)
    return DurationResult(duration, screened, traces)


def duration_sweep(durations: Sequence[float], pipe: PipelineConfig) -> list[CostReport]:
    """Best optimised :class:`CostReport` for every duration."""
    return [optimize_duration(T, pipe).best for T in durations]
