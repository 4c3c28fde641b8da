"""PID with integral clamping and output saturation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PidGains:
    kp: float = 1.0
    ki: float = 0.0
    kd: float = 0.0
    i_min: float = -1.0
    i_max: float = 1.0
    out_min: float = -math.inf
    out_max: float = math.inf


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float | None = None


class PidOutput(NamedTuple):
    output: float
    state: PidState
    ok: bool = True


# winch rate loop on the first-order drum plant (tau = 0.2 s)
WINCH_GAINS = PidGains(kp=2.0, ki=8.0, kd=0.0, i_min=-0.2, i_max=0.2, out_min=-1.0, out_max=1.0)
TRACKING_GAINS = PidGains(kp=1.2, ki=0.0, kd=0.1, i_min=-1.0, i_max=1.0)


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else min(x, hi)


def pid_step(state: PidState, gains: PidGains, error: float, dt: float) -> PidOutput:
    """One controller update; the derivative term is zero on the first call."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not math.isfinite(error):
        log.warning("non-finite PID error %r ignored", error)
        return PidOutput(0.0, state, False)
    integral = _clamp(state.integral + error * dt, gains.i_min, gains.i_max)
    deriv = 0.0 if state.prev_error is None else (error - state.prev_error) / dt
    u = gains.kp * error + gains.ki * integral + gains.kd * deriv
    return PidOutput(_clamp(u, gains.out_min, gains.out_max), replace(state, integral=integral, prev_error=error))


def winch_rate_controller(target_rate: float, measured_rate: float, state: PidState,
                          gains: PidGains = WINCH_GAINS, dt: float = 0.05) -> PidOutput:
    """Drum speed command from the payout-rate error."""
    return pid_step(state, gains, target_rate - measured_rate, dt)
