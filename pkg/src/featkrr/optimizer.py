"""Projected nonsmooth descent over the feature weights.

The objective depends on beta only through |beta| coordinate-wise, so the
search is confined to the nonnegative orthant without loss: the l1-kernel
nonsmoothness then lives exactly at beta_k = 0 and the g/h decomposition of
the derivative is exhaustive.

Step rules:

* active coordinates (beta_k > 0) take negative-gradient steps on g_k with a
  backtracking line search on J; a step that would cross zero is clamped to a
  hard 0, keeping supports discrete and certificates exact;
* inactive coordinates activate only when their one-sided coefficient h_k is
  decisively negative, entering at a conservative magnitude proportional to
  the current step;
* every accepted step strictly decreases J, so sub-level sets of mean(y^2)
  are preserved along the trace.

Termination is certificate-driven: the run stops when the directional report
passes the configured stationarity tolerances, when the iteration budget runs
out, or when an iterate touches the search box (which signals escape toward
infinity rather than progress).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelSpec, psi
from .ridge import RidgeFit, SampleSet, krr_fit
from .variation import DirectionalReport, PairCache, coordinate_decomposition, default_tolerance

STATIONARY_CERTIFIED = "stationary_certified"
MAX_ITERS = "max_iters"
BOX_BOUNDARY = "box_boundary"

_MIN_STEP_FACTOR = 1e-12
_ARMIJO = 1e-4
_ACTIVATION_CAP = 0.1


@dataclass(frozen=True)
class OptimizerConfig:
    step0: float = 1.0
    backtrack: float = 0.5
    max_iters: int = 200
    tol_g: float | None = None  # None -> derivative-scale default
    tol_h: float | None = None
    activation_threshold: float = 0.0
    box_bound: float = 1e3
    seed: int = 0

    def __post_init__(self):
        if not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not np.isfinite(self.box_bound) or self.box_bound <= 0:
            raise ValueError("box_bound must be finite and positive")
        if self.activation_threshold < 0:
            raise ValueError("activation_threshold must be nonnegative")


@dataclass(frozen=True)
class TracePoint:
    beta: np.ndarray
    objective: float
    worst_violation: float


@dataclass(frozen=True)
class OptimizerTrace:
    points: tuple[TracePoint, ...]
    terminal_fit: RidgeFit
    terminal_report: DirectionalReport
    status: str
    mean_y_sq: float
    iterations: int = field(default=0)

    @property
    def terminal_beta(self) -> np.ndarray:
        return self.terminal_fit.beta

    @property
    def objectives(self) -> np.ndarray:
        return np.array([p.objective for p in self.points])


def _resolve_tols(cfg: OptimizerConfig, lam: float, mean_y_sq: float) -> tuple[float, float]:
    base = default_tolerance(lam, mean_y_sq)
    return (cfg.tol_g if cfg.tol_g is not None else base,
            cfg.tol_h if cfg.tol_h is not None else base)


def _fit_at(spec, data, beta, lam, cache):
    G = psi(spec, cache.distance(beta)) if cache is not None else None
    return krr_fit(spec, data, beta, lam, G=G)


def _propose(beta, report, step, activation_gate, box_bound):
    """Candidate point for a given step size; returns None if it does not move."""
    cand = beta.copy()
    moved = False
    for k, g in report.smooth_grad.items():
        new = beta[k] - step * g
        if new <= 0.0:
            new = 0.0  # hard threshold: crossing coordinates land on exact zero
        new = min(new, box_bound)
        if new != beta[k]:
            moved = True
        cand[k] = new
    for k, h in report.onesided_coeff.items():
        if h < -activation_gate:
            cand[k] = min(step * (-h), _ACTIVATION_CAP, box_bound)
            moved = True
    return cand if moved else None


def optimize(spec: KernelSpec, data: SampleSet, beta0, lam: float, cfg: OptimizerConfig) -> OptimizerTrace:
    """Minimize J(., lam) from |beta0| inside [0, box_bound]^d."""
    beta = np.abs(np.asarray(beta0, dtype=float))
    if beta.shape != (data.dim,):
        raise ValueError("beta0 length must match the data dimension")
    beta = np.minimum(beta, cfg.box_bound)
    mean_y_sq = data.mean_y_squared()
    tol_g, tol_h = _resolve_tols(cfg, lam, mean_y_sq)
    activation_gate = max(tol_h, cfg.activation_threshold)
    cache = PairCache(spec, data.x) if PairCache.fits_in_memory(data.n, data.dim) else None

    fit = _fit_at(spec, data, beta, lam, cache)
    report = coordinate_decomposition(spec, data, fit, tol_g=tol_g, tol_h=tol_h, cache=cache)
    points = [TracePoint(beta=beta.copy(), objective=fit.objective, worst_violation=report.worst_violation)]
    status = MAX_ITERS
    step = cfg.step0
    iterations = 0

    for _ in range(cfg.max_iters):
        if report.is_stationary:
            status = STATIONARY_CERTIFIED
            break
        if np.any(beta >= cfg.box_bound):
            status = BOX_BOUNDARY
            break
        accepted = None
        trial = step
        while trial >= cfg.step0 * _MIN_STEP_FACTOR:
            cand = _propose(beta, report, trial, activation_gate, cfg.box_bound)
            if cand is None:
                break
            cand_fit = _fit_at(spec, data, cand, lam, cache)
            decrease = fit.objective - cand_fit.objective
            if decrease > _ARMIJO * trial * _squared_move(report, beta, cand):
                accepted = (cand, cand_fit)
                break
            trial *= cfg.backtrack
        if accepted is None:
            # no descent found at any step: certify whatever the report says
            status = STATIONARY_CERTIFIED if report.is_stationary else MAX_ITERS
            break
        beta, fit = accepted
        iterations += 1
        # a cheap trust-region flavor: reuse the successful scale, let it grow
        step = min(max(trial * 2.0, cfg.step0 * 1e-6), cfg.step0)
        report = coordinate_decomposition(spec, data, fit, tol_g=tol_g, tol_h=tol_h, cache=cache)
        points.append(TracePoint(beta=beta.copy(), objective=fit.objective, worst_violation=report.worst_violation))
        if np.any(beta >= cfg.box_bound):
            status = BOX_BOUNDARY
            break
    else:
        status = MAX_ITERS
    if status == MAX_ITERS and report.is_stationary:
        status = STATIONARY_CERTIFIED
    return OptimizerTrace(
        points=tuple(points),
        terminal_fit=fit,
        terminal_report=report,
        status=status,
        mean_y_sq=mean_y_sq,
        iterations=iterations,
    )


def _squared_move(report, beta, cand):
    """Directional-decrease scale for the Armijo test."""
    total = sum(g * g for g in report.smooth_grad.values())
    total += sum(h * h for k, h in report.onesided_coeff.items() if cand[k] != beta[k])
    return total


def monotone_guard(trace: OptimizerTrace) -> bool:
    """True iff J never increased and, once below mean(y^2), stayed below."""
    objs = trace.objectives
    if np.any(np.diff(objs) > 0):
        return False
    if objs[0] < trace.mean_y_sq and np.any(objs >= trace.mean_y_sq):
        return False
    return True


@dataclass(frozen=True)
class MultistartResult:
    best: OptimizerTrace
    traces: tuple[OptimizerTrace, ...]
    support_table: tuple[tuple[frozenset[int], int], ...]


def multistart(spec, data, lam, cfg, starts, n_threads: int = 1) -> MultistartResult:
    """Run optimize for every start; report the lowest terminal J and supports.

    Traces are independent; results are collected in start order regardless of
    scheduling, so the outcome does not depend on n_threads.
    """
    starts = [np.asarray(s, dtype=float) for s in starts]
    if not starts:
        raise ValueError("multistart needs at least one start")
    if n_threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            traces = list(pool.map(lambda b0: optimize(spec, data, b0, lam, cfg), starts))
    else:
        traces = [optimize(spec, data, b0, lam, cfg) for b0 in starts]
    best = min(traces, key=lambda t: t.terminal_fit.objective)
    counts: dict[frozenset[int], int] = {}
    for t in traces:
        supp = frozenset(int(k) for k in np.flatnonzero(t.terminal_beta))
        counts[supp] = counts.get(supp, 0) + 1
    table = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], sorted(kv[0]))))
    return MultistartResult(best=best, traces=tuple(traces), support_table=table)
