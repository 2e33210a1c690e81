"""First-order electro-thermal sigma-delta modulator.

Each clock period has a read phase, where the comparator samples the
Wheatstone output plus Johnson noise, and a feedback phase, where the
MOS switches heat one bridge for a fraction ``duty_alpha`` of the period.
The plant only sees the period-averaged feedback power because the
detector time constant spans hundreds of clock periods.

Bit convention: +1 means bridge 1 is warmer (comparator high), which reads
as a positive acceleration; a +1 bit selects FEEDBACK_2 for the next
feedback phase.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from . import _backend
from .dynamics import acceleration_to_power, detector_lag, discretize, fluid_lag
from .physics import OperatingPoint, SensorParameters, operating_point

BIAS_POWER = 225e-6
MAX_POWER = 900e-6

Signal = Callable[[np.ndarray], np.ndarray]


class FeedbackCommand(enum.Enum):
    NONE = 0
    FEEDBACK_1 = 1
    FEEDBACK_2 = 2


def feedback_power(cmd: FeedbackCommand, p0: float = BIAS_POWER, p_max: float = MAX_POWER) -> tuple[float, float]:
    """Dissipation ``(bridge 1, bridge 2)`` for a switch command."""
    if not p_max > p0 >= 0:
        raise ValueError("need p_max > p0 >= 0")
    if cmd is FeedbackCommand.NONE:
        return (p0, p0)
    if cmd is FeedbackCommand.FEEDBACK_1:
        return (p_max, 0.0)
    return (0.0, p_max)


def command_for_bit(bit: int) -> FeedbackCommand:
    # comparator low -> heat bridge 1, high -> heat bridge 2
    return FeedbackCommand.FEEDBACK_2 if bit > 0 else FeedbackCommand.FEEDBACK_1


def full_scale_from_duty(duty_alpha: float, p_max: float, r_th_detector: float, k_mems: float) -> float:
    """Acceleration (g) whose convective power the feedback can just cancel."""
    if not 0 <= duty_alpha <= 1:
        raise ValueError("duty cycle must lie in [0, 1]")
    return duty_alpha * p_max * r_th_detector / k_mems


def duty_for_full_scale(full_scale: float, p_max: float, r_th_detector: float, k_mems: float) -> float:
    duty = full_scale * k_mems / (p_max * r_th_detector)
    if not 0 < duty <= 1:
        raise ValueError(f"full scale {full_scale:g} g needs duty cycle {duty:.3g}, outside (0, 1]")
    return duty


@dataclass
class NoiseSource:
    """Comparator-input Johnson noise.

    The comparator samples noise whose bandwidth (``bandwidth_limit``) is
    far above the clock, so by default the full band aliases into every
    sample.  ``aliasing="nyquist"`` instead limits the variance to the first
    Nyquist zone.
    """

    density: float
    bandwidth_limit: float = 6e6
    seed: int = 0
    aliasing: str = "wideband"
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.aliasing not in ("wideband", "nyquist"):
            raise ValueError(f"unknown aliasing mode {self.aliasing!r}")
        self.rng = np.random.default_rng(self.seed)

    def sigma(self, f_ck: float) -> float:
        if not f_ck > 0:
            raise ValueError("f_ck must be positive")
        bw = self.bandwidth_limit
        if self.aliasing == "nyquist":
            bw = min(0.5 * f_ck, bw)
        return self.density * math.sqrt(bw)

    def draw(self, f_ck: float, n: int) -> np.ndarray:
        return self.rng.standard_normal(n) * self.sigma(f_ck)


def comparator_noise_sample(src: NoiseSource, f_ck: float) -> float:
    return float(src.draw(f_ck, 1)[0])


@dataclass(frozen=True)
class ModulatorConfig:
    f_ck: float = 131e3
    full_scale: float = 2.0
    integrator: str = "thermal"
    noise_enabled: bool = True
    seed: int = 0
    duration: float = 8.0
    p0: float = BIAS_POWER
    p_max: float = MAX_POWER
    fluid_lag: bool = True
    tau_fluid: float = 3e-3
    settle: float | None = None  # defaults to 5 tau_d
    noise_aliasing: str = "wideband"
    self_heating: bool = True
    bit_budget: int = 200_000_000
    chunk: int = 1 << 20

    def __post_init__(self):
        if not self.f_ck > 0:
            raise ValueError("f_ck must be positive")
        if not self.full_scale > 0:
            raise ValueError("full_scale must be positive")
        if self.integrator not in ("thermal", "ideal"):
            raise ValueError(f"integrator must be 'thermal' or 'ideal', got {self.integrator!r}")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.chunk <= 0 or self.chunk % 8:
            raise ValueError("chunk must be a positive multiple of 8")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.f_ck))

    @classmethod
    def from_duty(cls, duty_alpha: float, sensor: SensorParameters | None = None, **kw) -> ModulatorConfig:
        sensor = sensor or SensorParameters()
        op = operating_point(sensor)
        p_max = kw.get("p_max", MAX_POWER)
        fs = full_scale_from_duty(duty_alpha, p_max, sensor.bridge.r_th_detector, op.k_mems)
        return cls(full_scale=fs, **kw)


@dataclass
class BitStream:
    bits: np.ndarray
    f_ck: float
    scale: float
    seed: int = 0

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.int8)

    def __len__(self):
        return self.bits.size

    def values(self) -> np.ndarray:
        return self.bits * float(self.scale)

    def mean(self) -> float:
        return float(self.bits.mean(dtype=np.float64))

    def save(self, path) -> None:
        write_packed(path, [self.bits], self.f_ck, self.scale, self.seed)

    @classmethod
    def load(cls, path) -> BitStream:
        return read_packed(path)

    def save_text(self, path) -> None:
        Path(path).write_text("".join("1\n" if b > 0 else "0\n" for b in self.bits.tolist()))

    @classmethod
    def load_text(cls, path, f_ck: float, scale: float, seed: int = 0) -> BitStream:
        raw = np.loadtxt(path, dtype=np.int8, ndmin=1)
        return cls(np.where(raw > 0, 1, -1), f_ck, scale, seed)


_MAGIC = b"TSDB\x01"
_HEADER = struct.Struct("<ddQq")


def write_packed(path, chunks, f_ck: float, scale: float, seed: int) -> int:
    """Write ``chunks`` of +-1 bits as a packed file; returns the bit count.

    Layout: magic, then little-endian ``f_ck`` (f64), ``scale`` (f64),
    ``length`` (u64), ``seed`` (i64), then MSB-first packed bits, 1 for +1.
    """
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    n = 0
    pending = np.empty(0, dtype=bool)
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(_HEADER.pack(f_ck, scale, 0, seed))
        for c in chunks:
            b = np.concatenate([pending, np.asarray(c) > 0])
            k = b.size - b.size % 8
            fh.write(np.packbits(b[:k]).tobytes())
            pending = b[k:]
            n += len(c)
        if pending.size:
            fh.write(np.packbits(pending).tobytes())
        fh.seek(len(_MAGIC))
        fh.write(_HEADER.pack(f_ck, scale, n, seed))
    tmp.replace(path)
    return n


def read_packed(path) -> BitStream:
    data = Path(path).read_bytes()
    if not data.startswith(_MAGIC):
        raise ValueError(f"{path}: not a packed bit-stream file")
    f_ck, scale, n, seed = _HEADER.unpack_from(data, len(_MAGIC))
    body = np.frombuffer(data, dtype=np.uint8, offset=len(_MAGIC) + _HEADER.size)
    bits = np.unpackbits(body, count=n).astype(np.int8) * 2 - 1
    return BitStream(bits, f_ck, scale, seed)


# input signals ---------------------------------------------------------------


def dc(a: float) -> Signal:
    return lambda t: np.full(np.shape(t), float(a))


def sine(freq: float, amplitude: float, phase: float = 0.0) -> Signal:
    return lambda t: amplitude * np.sin(2 * np.pi * freq * np.asarray(t) + phase)


def from_samples(times, accel) -> Signal:
    """Linear interpolation of tabulated acceleration, held flat outside the table."""
    times = np.asarray(times, dtype=float)
    accel = np.asarray(accel, dtype=float)
    if times.ndim != 1 or times.shape != accel.shape or times.size == 0:
        raise ValueError("need matching 1-d time and acceleration arrays")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    return lambda t: np.interp(t, times, accel)


def parse_input_spec(spec: str) -> Signal:
    """``dc:A``, ``sine:F,A`` or ``file:PATH`` (two columns: time s, acceleration g)."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "dc":
            return dc(float(arg))
        if kind == "sine":
            f, a = (float(v) for v in arg.split(","))
            return sine(f, a)
        if kind == "file":
            tab = np.loadtxt(arg, delimiter="," if arg.endswith(".csv") else None, ndmin=2, comments="#")
            return from_samples(tab[:, 0], tab[:, 1])
    except (ValueError, OSError, IndexError) as exc:
        raise ValueError(f"malformed input spec {spec!r}: {exc}") from exc
    raise ValueError(f"malformed input spec {spec!r}: expected dc:, sine: or file:")


# the loop -------------------------------------------------------------------


class ElectroThermalModulator:
    """Stateful first-order loop; one instance per simulation run."""

    def __init__(self, config: ModulatorConfig, sensor: SensorParameters | None = None):
        self.config = config
        self.sensor = sensor = sensor or SensorParameters()
        bridge = sensor.bridge
        k_mems = operating_point(sensor).k_mems
        self.duty = duty_for_full_scale(config.full_scale, config.p_max, bridge.r_th_detector, k_mems)
        self.p_comp = self.duty * config.p_max
        # P_comp/2 heats each bridge on average, shifting the common mode
        shift = 0.5 * self.p_comp * bridge.r_th_detector if config.self_heating else 0.0
        self.op: OperatingPoint = operating_point(sensor, t_cm_offset=shift)
        det = discretize(detector_lag(bridge), config.f_ck)
        self.pole = det.pole if config.integrator == "thermal" else 1.0
        self.gain = det.gain
        self.fluid = discretize(fluid_lag(config.tau_fluid), config.f_ck) if config.fluid_lag else None
        self.noise = NoiseSource(self.op.noise_density, sensor.noise_bandwidth, config.seed, config.noise_aliasing)
        self.delta_t = 0.0  # detector differential temperature, K
        self._fluid_y = 0.0
        self._fluid_x = 0.0

    @property
    def noise_sigma(self) -> float:
        return self.noise.sigma(self.config.f_ck) if self.config.noise_enabled else 0.0

    def _power(self, a: np.ndarray) -> np.ndarray:
        if self.fluid is not None:
            a, self._fluid_y, self._fluid_x = self.fluid.filter(a, self._fluid_y, self._fluid_x)
        return acceleration_to_power(a, self.op, self.sensor.bridge)

    def run(self, a) -> np.ndarray:
        """Advance one clock period per acceleration sample; returns the bits."""
        a = np.ascontiguousarray(a, dtype=np.float64)
        power = np.ascontiguousarray(self._power(a), dtype=np.float64)
        if self.config.noise_enabled:
            noise = self.noise.draw(self.config.f_ck, a.size)
        else:
            noise = np.empty(0)
        bits = np.empty(a.size, dtype=np.int8)
        self.delta_t = _backend.run_loop(
            power, noise, bits, self.delta_t, self.pole, self.gain, self.op.s_wheat, self.p_comp
        )
        return bits

    def step(self, a_sample: float) -> int:
        return int(self.run(np.array([a_sample]))[0])

    def chunks(self, signal: Signal) -> Iterator[np.ndarray]:
        """Bits in blocks of ``config.chunk``, settling prefix already dropped."""
        cfg = self.config
        settle = 5 * self.sensor.bridge.tau_d if cfg.settle is None else cfg.settle
        n_settle = int(round(settle * cfg.f_ck))
        total = n_settle + cfg.n_samples
        start = 0
        while start < total:
            stop = min(start + cfg.chunk, total)
            t = (np.arange(start, stop) - n_settle) / cfg.f_ck
            bits = self.run(signal(t))
            if stop > n_settle:
                yield bits[max(0, n_settle - start):]
            start = stop


def simulate_chunks(config: ModulatorConfig, signal: Signal, sensor: SensorParameters | None = None):
    return ElectroThermalModulator(config, sensor).chunks(signal)


def simulate(config: ModulatorConfig, signal: Signal, sensor: SensorParameters | None = None) -> BitStream:
    """Run the loop from rest and collect the whole bit-stream (1 byte per bit).

    Streams longer than ``config.bit_budget`` must go through
    :func:`simulate_chunks` instead.
    """
    if config.n_samples > config.bit_budget:
        raise MemoryError(
            f"{config.n_samples} bits exceed the budget of {config.bit_budget}; use simulate_chunks"
        )
    bits = np.concatenate(list(simulate_chunks(config, signal, sensor)))
    return BitStream(bits, config.f_ck, config.full_scale, config.seed)


def simulate_ideal(config: ModulatorConfig, signal: Signal, sensor: SensorParameters | None = None) -> BitStream:
    """Same loop with the detector lag replaced by an accumulator of equal per-period gain."""
    return simulate(replace(config, integrator="ideal"), signal, sensor)
