"""First-order thermal lags and their exact discrete-time equivalents."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .physics import BridgeParameters, OperatingPoint


@dataclass
class FirstOrderLag:
    """``dc_gain / (1 + tau s)`` with a mutable output state."""

    dc_gain: float
    tau: float
    state: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    def response(self, f):
        """Continuous-time frequency response at ``f`` (Hz)."""
        return self.dc_gain / (1.0 + 2j * np.pi * np.asarray(f) * self.tau)


@dataclass(frozen=True)
class DiscreteLag:
    """Zero-order-hold equivalent ``y[n] = pole*y[n-1] + gain*x[n-1]``."""

    pole: float
    gain: float
    t_e: float

    @property
    def dc_gain(self) -> float:
        return self.gain / (1.0 - self.pole)

    def response(self, f):
        z1 = np.exp(-2j * np.pi * np.asarray(f) * self.t_e)
        return self.gain * z1 / (1.0 - self.pole * z1)

    def filter(self, x, zi: float = 0.0, x_prev: float = 0.0):
        """Filter a block; returns ``(y, y_last, x_last)`` for continuation."""
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return x.copy(), zi, x_prev
        # shift by one sample, feeding the previous block's last input
        xd = np.empty_like(x)
        xd[0] = x_prev
        xd[1:] = x[:-1]
        y, zf = signal.lfilter([self.gain], [1.0, -self.pole], xd, zi=[self.pole * zi])
        return y, float(y[-1]), float(x[-1])


def discretize(lag: FirstOrderLag, f_ck: float) -> DiscreteLag:
    if not f_ck > 0:
        raise ValueError("f_ck must be positive")
    t_e = 1.0 / f_ck
    pole = math.exp(-t_e / lag.tau)
    # -expm1 keeps 1 - pole accurate for tau >> t_e
    return DiscreteLag(pole=pole, gain=lag.dc_gain * -math.expm1(-t_e / lag.tau), t_e=t_e)


def step_lag(lag: FirstOrderLag, x: float, t_e: float) -> float:
    """Advance ``lag`` by one period of ``t_e`` driven by the held input ``x``."""
    if not t_e > 0:
        raise ValueError("t_e must be positive")
    pole = math.exp(-t_e / lag.tau)
    lag.state = pole * lag.state + lag.dc_gain * -math.expm1(-t_e / lag.tau) * x
    return lag.state


def cutoff_frequency(lag: FirstOrderLag) -> float:
    return 1.0 / (2.0 * math.pi * lag.tau)


def acceleration_to_power(a, op: OperatingPoint, bridge: BridgeParameters):
    """Differential thermal power (W) equivalent to acceleration ``a`` (g)."""
    return op.k_mems / bridge.r_th_detector * a


def detector_lag(bridge: BridgeParameters) -> FirstOrderLag:
    return FirstOrderLag(dc_gain=bridge.r_th_detector, tau=bridge.tau_d)


def fluid_lag(tau: float) -> FirstOrderLag:
    return FirstOrderLag(dc_gain=1.0, tau=tau)
