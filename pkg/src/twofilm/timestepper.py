"""Adaptive explicit time integration for the coefficient ODE.

Embedded Bogacki--Shampine 3(2) pair with the first-same-as-last property:
third-order propagation, second-order error estimate, three fresh right-hand
side evaluations per accepted step.  Two mechanisms bound the step size:

* the usual mixed absolute/relative local error controller, and
* a hard stability cap dt <= c_stab / stiffness_scale, where the scale is
  the largest linearized decay rate reported by the right-hand side
  (mobility * k_max^4 for this fourth-order problem).  Without the cap the
  error controller alone happily walks the explicit pair out of its
  stability region on stiff modes whose amplitude is already at round-off.

The integrator is deterministic: identical inputs produce bitwise identical
trajectories, and sample times are hit exactly (the step is truncated at
each boundary; a truncated step does not shrink the controller's standing
proposal).  A trajectory records enough of the controller state (proposed
next dt, accumulated dissipation) for a resumed run to continue bitwise
identically from any sample.

Cumulative dissipation is accumulated per accepted step with the trapezoid
rule, using the dissipation values that the first and last (FSAL) stages
report for free; `accumulate="sample"` falls back to trapezoid over the
recorded samples only.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Bogacki-Shampine 3(2): stage nodes, third-order propagation weights, and
# the difference between the third- and embedded second-order solutions.
_C2, _C3 = 0.5, 0.75
_A21 = 0.5
_A32 = 0.75
_B1, _B2, _B3 = 2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0
# y3 - y2 = dt * (e1 k1 + e2 k2 + e3 k3 + e4 k4)
_E1, _E2, _E3, _E4 = _B1 - 7.0 / 24.0, _B2 - 0.25, _B3 - 1.0 / 3.0, -0.125

_ORDER = 3
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@dataclass
class StepAux:
    """Side information a right-hand side reports per evaluation."""

    diss_rate: float = 0.0
    stiffness_scale: float = 0.0


@dataclass
class StepControl:
    """Tolerances and limits for the adaptive stepper."""

    rel_tol: float = 1e-7
    abs_tol: float = 1e-10
    safety: float = 0.9
    c_stab: float = 1.2
    dt_init: Optional[float] = None
    dt_min: float = 1e-13
    dt_max: Optional[float] = None
    max_steps: int = 20_000_000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not (0 < self.safety < 1):
            raise ValueError("safety factor must lie in (0, 1)")
        if self.c_stab <= 0:
            raise ValueError("stability constant must be positive")


class StiffnessAbort(RuntimeError):
    """Raised when the controller underflows the minimum step size."""

    def __init__(self, t, dt, error_norm, cap):
        self.t, self.dt, self.error_norm, self.cap = t, dt, error_norm, cap
        super().__init__(
            f"step size underflow at t = {t:.6g}: dt = {dt:.3g} below the "
            f"minimum while the error norm is {error_norm:.3g} and the "
            f"stability cap is {cap:.3g}; the problem is stiffer than the "
            "explicit pair can handle at this tolerance/resolution")


@dataclass
class Trajectory:
    """Sampled solution values plus controller bookkeeping."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)          # raw y vectors
    diss_rates: list = field(default_factory=list)
    diss_cums: list = field(default_factory=list)
    dt_proposals: list = field(default_factory=list)    # controller state per sample
    n_steps: int = 0
    n_rejected: int = 0
    n_rhs: int = 0
    dt_next: float = 0.0       # controller proposal when the run ended
    diss_cum: float = 0.0      # accumulated dissipation at the end


def _error_norm(err, y_old, y_new, control):
    scale = control.abs_tol + control.rel_tol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def integrate_ode(rhs, y0, t0: float, sample_times, control: StepControl,
                  diss_cum0: float = 0.0, dt_start: Optional[float] = None,
                  accumulate: str = "step", record_initial: bool = True,
                  on_sample: Optional[Callable] = None) -> Trajectory:
    """March y' = rhs(t, y) through every time in `sample_times`.

    rhs returns (dy, StepAux).  `sample_times` must be strictly increasing
    and start after t0; each is hit exactly and recorded.  `on_sample`, when
    given, is called as on_sample(t, y, diss_rate, diss_cum, dt_next) at
    every recorded time (including the initial one).
    """
    if accumulate not in ("step", "sample"):
        raise ValueError(f"accumulate must be 'step' or 'sample', got {accumulate!r}")
    samples = np.atleast_1d(np.asarray(sample_times, dtype=float))
    if samples.size == 0:
        raise ValueError("need at least one sample time")
    if samples[0] <= t0 or np.any(np.diff(samples) <= 0):
        raise ValueError("sample times must be strictly increasing and after t0")

    t = float(t0)
    y = np.array(y0, dtype=float)
    traj = Trajectory(diss_cum=float(diss_cum0))

    k1, aux1 = rhs(t, y)
    traj.n_rhs += 1
    cap = control.c_stab / aux1.stiffness_scale if aux1.stiffness_scale > 0 else np.inf

    dt_prop = dt_start if dt_start is not None else control.dt_init
    if dt_prop is None:
        dt_prop = cap if np.isfinite(cap) else (samples[-1] - t0) / 100.0
    dt_prop = float(dt_prop)

    def clamp(dt):
        dt = min(dt, cap)
        if control.dt_max is not None:
            dt = min(dt, control.dt_max)
        return dt

    dt_prop = clamp(dt_prop)

    def record(time, diss_rate):
        traj.times.append(time)
        traj.states.append(y.copy())
        traj.diss_rates.append(diss_rate)
        traj.diss_cums.append(traj.diss_cum)
        traj.dt_proposals.append(dt_prop)
        if on_sample is not None:
            on_sample(time, y.copy(), diss_rate, traj.diss_cum, dt_prop)

    if record_initial:
        record(t, aux1.diss_rate)

    last_rate = aux1.diss_rate     # rate at the most recent sample ('sample' mode)
    last_time = t
    for target in samples:
        while t < target:
            if traj.n_steps + traj.n_rejected >= control.max_steps:
                raise RuntimeError(
                    f"step budget exhausted at t = {t:.6g} after "
                    f"{traj.n_steps} accepted steps")
            truncated = t + dt_prop >= target
            dt_step = target - t if truncated else dt_prop

            k2, _ = rhs(t + _C2 * dt_step, y + (dt_step * _A21) * k1)
            k3, _ = rhs(t + _C3 * dt_step, y + (dt_step * _A32) * k2)
            y_new = y + dt_step * (_B1 * k1 + _B2 * k2 + _B3 * k3)
            k4, aux4 = rhs(t + dt_step, y_new)
            traj.n_rhs += 3
            err = dt_step * (_E1 * k1 + _E2 * k2 + _E3 * k3 + _E4 * k4)
            err_norm = _error_norm(err, y, y_new, control)

            if err_norm <= 1.0:
                if accumulate == "step":
                    traj.diss_cum += 0.5 * dt_step * (aux1.diss_rate + aux4.diss_rate)
                t = target if truncated else t + dt_step
                y = y_new
                k1, aux1 = k4, aux4            # first-same-as-last
                traj.n_steps += 1
                cap = (control.c_stab / aux1.stiffness_scale
                       if aux1.stiffness_scale > 0 else np.inf)
                if not truncated:
                    factor = (_MAX_FACTOR if err_norm == 0.0
                              else min(_MAX_FACTOR,
                                       max(_MIN_FACTOR,
                                           control.safety * err_norm ** (-1.0 / _ORDER))))
                    dt_prop = dt_step * factor
                # a truncated accepted step keeps the standing proposal: the
                # boundary said nothing about accuracy at the full size
            else:
                traj.n_rejected += 1
                dt_prop = dt_step * max(_MIN_FACTOR,
                                        control.safety * err_norm ** (-1.0 / _ORDER))

            dt_prop = clamp(dt_prop)
            if dt_prop < control.dt_min:
                raise StiffnessAbort(t, dt_prop, err_norm, cap)

        if accumulate == "sample":
            traj.diss_cum += 0.5 * (t - last_time) * (last_rate + aux1.diss_rate)
        last_rate, last_time = aux1.diss_rate, t
        record(t, aux1.diss_rate)

    traj.dt_next = dt_prop
    return traj
