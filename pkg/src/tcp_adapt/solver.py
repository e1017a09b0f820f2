"""Generic solver for convex-linear saddle-point problems on the simplex.

The objective is minimized over model parameters (exactly, via a
caller-supplied closed-form step) and maximized over a row-stochastic
labeling matrix Q by projected gradient ascent with a decaying learning
rate. Convergence is measured on the change of the objective value
between consecutive iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .simplex import check_soft_labels, project_rows


class NumericalBlowupError(RuntimeError):
    """Objective became non-finite during the saddle iteration."""

    def __init__(self, iteration: int, value: float):
        super().__init__(f"non-finite objective {value!r} at iteration {iteration}")
        self.iteration = iteration


@dataclass
class SolverOptions:
    """Options for the projected gradient-descent-ascent loop.

    alpha0 is the first step size; the step at iteration t is
    alpha0 / t or alpha0 / sqrt(t) depending on the schedule. ``ascent``
    is a debug switch: False applies the labeling update with a minus
    sign instead (for comparing the two update conventions).
    """

    alpha0: float = 1.0
    schedule: str = "inverse_t"
    epsilon: float = 1e-9
    max_iter: int = 5000
    trace: bool = False
    ascent: bool = True
    debug: bool = False

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.schedule not in ("inverse_t", "inverse_sqrt_t"):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def step_size(self, t: int) -> float:
        if self.schedule == "inverse_t":
            return self.alpha0 / t
        return self.alpha0 / np.sqrt(t)


@dataclass
class SaddleResult:
    """Outcome of a saddle solve: parameters, worst-case labeling, value."""

    params: object
    q_star: np.ndarray
    objective: float
    iterations: int
    converged: bool
    trace: list = field(default=None, repr=False)
    reverted_to_source: bool = False
    # tail-averaged labeling of a non-converged run; the preferred warm
    # start for annealing restarts even when a raw iterate scores higher
    q_tail: np.ndarray = field(default=None, repr=False)


def solve_saddle(inner_min, grad_q, objective, m: int, K: int,
                 opts: SolverOptions | None = None,
                 q_init: np.ndarray | None = None) -> SaddleResult:
    """Alternate exact inner minimization with one projected ascent step.

    Args:
        inner_min: Q -> params, the exact minimizer for a fixed labeling.
        grad_q: params -> (m, K) gradient of the objective in Q.
        objective: (params, Q) -> float.
        m, K: labeling matrix shape.
        opts: solver options; defaults are used when None.
        q_init: starting labeling; uniform 1/K when None.

    Each iteration fits parameters to the current labeling and evaluates
    the objective at that pair, so the reported value is an exact inner
    minimum and never exceeds 0 when the parameter family contains the
    reference model. On hitting max_iter the best iterate by objective
    value is returned with converged False; the average labeling over
    the tail half of the run competes as a candidate, since averaged
    iterates of gradient descent-ascent converge when raw ones orbit.
    """
    if opts is None:
        opts = SolverOptions()
    if q_init is None:
        Q = np.full((m, K), 1.0 / K)
    else:
        Q = np.array(q_init, dtype=np.float64)
    sign = 1.0 if opts.ascent else -1.0

    trace = [] if opts.trace else None
    best = None  # (objective, params, Q, iteration)
    tail_start = opts.max_iter // 2
    tail_sum, tail_n = None, 0
    prev_obj = np.inf
    for t in range(1, opts.max_iter + 1):
        params = inner_min(Q)
        obj = float(objective(params, Q))
        if not np.isfinite(obj):
            raise NumericalBlowupError(t, obj)
        alpha = opts.step_size(t)
        if trace is not None:
            trace.append((t, obj, alpha))
        if best is None or obj > best[0]:
            best = (obj, params, Q, t)
        if abs(obj - prev_obj) <= opts.epsilon:
            return SaddleResult(params, Q, obj, t, True, trace)
        prev_obj = obj
        if t > tail_start:
            if tail_sum is None:
                tail_sum = np.zeros_like(Q)
            tail_sum += Q
            tail_n += 1
        Q = project_rows(Q + sign * alpha * grad_q(params))
        if opts.debug:
            check_soft_labels(Q)

    q_avg = None
    if tail_n > 0:
        q_avg = tail_sum / tail_n
        params_avg = inner_min(q_avg)
        obj_avg = float(objective(params_avg, q_avg))
        if np.isfinite(obj_avg) and obj_avg > best[0]:
            best = (obj_avg, params_avg, q_avg, opts.max_iter)
    obj, params, Q, _ = best
    return SaddleResult(params, Q, obj, opts.max_iter, False, trace, q_tail=q_avg)


ANNEAL_STAGES = 4
ANNEAL_DECAY = 4.0


def solve_saddle_annealed(inner_min, grad_q, objective, m: int, K: int,
                          opts: SolverOptions | None = None,
                          worst_case=None) -> SaddleResult:
    """Saddle solve with warm-started annealing stages.

    Splits the iteration budget into stages, each a plain solve_saddle
    run; every stage after the first starts from the previous stage's
    tail-averaged labeling with the initial step size divided by
    ANNEAL_DECAY. Restarting from averaged iterates with cooler steps
    settles the orbits that single-schedule descent-ascent can fall into.

    ``worst_case`` (params -> float), when given, is an upper bound on
    the saddle value, the counterpart of the objective's lower bound;
    annealing stops once the two bracket the saddle tightly and the
    upper bound certifies the parameters (is nonpositive). A gap stop
    does not set ``converged``, which reports only the objective-change
    criterion.
    """
    from dataclasses import replace

    if opts is None:
        opts = SolverOptions()
    per_stage = max(1, opts.max_iter // ANNEAL_STAGES)
    alpha = opts.alpha0
    q0 = None
    best = None
    total_iters = 0
    converged = False
    trace = [] if opts.trace else None
    for _ in range(ANNEAL_STAGES):
        stage_opts = replace(opts, alpha0=alpha, max_iter=per_stage)
        res = solve_saddle(inner_min, grad_q, objective, m, K, stage_opts, q_init=q0)
        if trace is not None and res.trace:
            trace.extend((t + total_iters, o, a) for t, o, a in res.trace)
        total_iters += res.iterations
        if best is None or res.objective > best.objective:
            best = res
        if res.converged:
            converged = True
            break
        if worst_case is not None:
            upper = float(worst_case(res.params))
            gap = upper - res.objective
            if upper <= 0.0 and gap <= max(1e-8, 1e-3 * abs(res.objective)):
                best = res
                break
        q0 = res.q_tail if res.q_tail is not None else res.q_star
        alpha /= ANNEAL_DECAY
    return SaddleResult(best.params, best.q_star, best.objective,
                        total_iters, converged, trace)


def write_trace_csv(path, trace) -> None:
    """Write a solver trace as CSV rows (iteration, objective, step_size)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,objective,step_size\n")
        for t, obj, alpha in trace:
            fh.write(f"{t},{obj!r},{alpha!r}\n")
