"""ODE driver: embedded Runge-Kutta 4(5) over breakpoint-separated segments.

Wraps scipy's Dormand-Prince RK45 (adaptive, step rejection on the
embedded error estimate). Breakpoints split the span so the solver never
steps across a force discontinuity. Terminal events (runaway guard,
normalization guard) stop the run and are reported back to the caller.
"""

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.integrate import solve_ivp

from core.exceptions import StepSizeUnderflow

# tolerances large enough that no step is ever rejected
_FIXED_STEP_TOL = 1e3


@dataclass
class IntegrationResult:
    t: np.ndarray            # requested output times actually reached
    y: np.ndarray            # (n_state, len(t))
    step_t: np.ndarray       # accepted step times, all segments
    step_y: np.ndarray       # (n_state, len(step_t))
    nfev: int = 0
    n_steps: int = 0
    event: Optional[int] = None      # index of the terminal event that fired
    t_event: Optional[float] = None
    elapsed: float = 0.0
    segments: list = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.event is None


def _segments(t0: float, t1: float, breakpoints: Sequence[float]) -> list[tuple[float, float]]:
    inner = sorted(b for b in set(breakpoints) if t0 < b < t1)
    edges = [t0, *inner, t1]
    return list(zip(edges[:-1], edges[1:]))


def integrate_system(
    rhs: Callable,
    t_span: tuple[float, float],
    y0,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    t_eval: Optional[np.ndarray] = None,
    breakpoints: Sequence[float] = (),
    events: Sequence[Callable] = (),
    fixed_step: Optional[float] = None,
    label: str = "",
) -> IntegrationResult:
    """Integrate y' = rhs(t, y) over t_span.

    Output is sampled on t_eval (dense output), or on the accepted steps
    when t_eval is None. With fixed_step the solver takes steps of exactly
    that size (the last one clipped to the span).
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    y = np.asarray(y0, dtype=float)
    options = {"rtol": rtol, "atol": atol}
    if fixed_step is not None:
        options = {
            "rtol": _FIXED_STEP_TOL,
            "atol": _FIXED_STEP_TOL,
            "first_step": fixed_step,
            "max_step": fixed_step,
        }

    start = time.time()
    step_t, step_y, out_t, out_y = [np.array([t0])], [y[:, None]], [], []
    nfev = n_steps = 0
    event, t_event = None, None
    for a, b in _segments(t0, t1, breakpoints):
        sol = solve_ivp(rhs, (a, b), y, method="RK45", dense_output=True, events=list(events) or None, **options)
        nfev += sol.nfev
        n_steps += len(sol.t) - 1
        if sol.status == -1:
            raise StepSizeUnderflow(float(sol.t[-1]), sol.message)
        step_t.append(sol.t[1:])
        step_y.append(sol.y[:, 1:])
        reached = float(sol.t[-1])
        if t_eval is not None:
            last = b == t1 or sol.status == 1
            mask = (t_eval >= a) & ((t_eval <= reached) if last else (t_eval < reached))
            if np.any(mask):
                out_t.append(t_eval[mask])
                out_y.append(sol.sol(t_eval[mask]))
        y = sol.y[:, -1]
        if sol.status == 1:
            fired = [i for i, te in enumerate(sol.t_events) if len(te)]
            event = fired[0]
            t_event = float(sol.t_events[event][0])
            break

    result_t = np.concatenate(step_t)
    result_y = np.concatenate(step_y, axis=1)
    if t_eval is not None:
        out = (np.concatenate(out_t), np.concatenate(out_y, axis=1)) if out_t else (np.empty(0), np.empty((len(y), 0)))
    else:
        out = (result_t, result_y)
    elapsed = time.time() - start
    logger.debug(f"[Integrator] {label} {n_steps} steps, {nfev} evaluations in {elapsed:.2f}s")
    return IntegrationResult(
        t=out[0],
        y=out[1],
        step_t=result_t,
        step_y=result_y,
        nfev=nfev,
        n_steps=n_steps,
        event=event,
        t_event=t_event,
        elapsed=elapsed,
    )


def terminal(fn: Callable, direction: float = 0.0) -> Callable:
    """Mark an event function as terminal for solve_ivp."""
    fn.terminal = True
    fn.direction = direction
    return fn
