"""Static model of the convective sensing cell.

Heater temperature, conduction profile around the heater, convective
differential temperature, detector resistances, Wheatstone bridge
sensitivity, Johnson noise and the resulting intrinsic resolution.

Temperatures in the bridge equations (``detector_resistances``,
``wheatstone_sensitivity``) are rises above ambient: ``r_nominal`` is the
detector resistance at ambient temperature.  Absolute temperatures are
used everywhere else.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

from scipy import constants, optimize

BOLTZMANN = constants.k
STANDARD_GRAVITY = constants.g  # 9.80665 m/s^2 per g

# Prototype operating point.
HEATER_POWER = 42e-3
HEATER_TEMPERATURE = 720.0
COMMON_MODE_TEMPERATURE = 423.0
AMBIENT_TEMPERATURE = 298.0  # not given by the prototype data; assumed room temperature
K_MEMS = 1.53  # K/g
TCR = 9e-4
DETECTOR_RESISTANCE = 50e3  # at the common-mode temperature
NOISE_BANDWIDTH = 6e6
TARGET_SENSITIVITY = 1.55e-3  # V/g, two-resistor bridge


class ModelError(ValueError):
    """Raised when parameters fall outside the validity domain of the model."""


@dataclass(frozen=True)
class GasProperties:
    rho: float = 1.16
    beta: float = 1.0 / 300.0
    mu: float = 1.85e-5
    l: float = 300e-6
    tau_fluid: float = 3e-3

    def __post_init__(self):
        for name in ("rho", "beta", "mu", "l", "tau_fluid"):
            if not getattr(self, name) > 0:
                raise ModelError(f"gas property {name} must be strictly positive")
        if not 0.5e-3 <= self.tau_fluid <= 12e-3:
            warnings.warn(
                f"fluid time constant {self.tau_fluid:g} s outside the usual 0.5-12 ms range",
                stacklevel=2,
            )


def _nominal_resistance() -> float:
    return DETECTOR_RESISTANCE / (1.0 + TCR * (COMMON_MODE_TEMPERATURE - AMBIENT_TEMPERATURE))


@dataclass(frozen=True)
class BridgeParameters:
    """Thermal and electrical parameters of the detecting bridges.

    ``r1``, ``r2`` and ``r_detector`` are placeholder geometry chosen so the
    linear (``gamma = 0``) conduction profile puts the detectors close to the
    423 K common-mode temperature.
    """

    r_th_heater: float = (HEATER_TEMPERATURE - AMBIENT_TEMPERATURE) / HEATER_POWER
    r_th_detector: float = 1e4
    tau_d: float = 3.3e-3
    tcr: float = TCR
    r_nominal: float = field(default_factory=_nominal_resistance)
    gamma: float = 0.0
    r1: float = 20e-6
    r2: float = 400e-6
    r_detector: float = 165e-6

    def __post_init__(self):
        if not (0 < self.r1 < self.r_detector < self.r2):
            raise ModelError("bridge geometry must satisfy 0 < r1 < r_detector < r2")
        if self.tau_d <= 0 or self.tcr <= 0 or self.r_nominal <= 0:
            raise ModelError("tau_d, tcr and r_nominal must be strictly positive")
        if self.r_th_heater <= 0 or self.r_th_detector <= 0:
            raise ModelError("thermal resistances must be strictly positive")


def calibrated_supply_voltage(
    sensitivity: float = TARGET_SENSITIVITY,
    k_mems: float = K_MEMS,
    tcr: float = TCR,
    t_cm_rise: float = COMMON_MODE_TEMPERATURE - AMBIENT_TEMPERATURE,
) -> float:
    """Bridge supply giving ``sensitivity`` (V/g) for a two-resistor bridge."""
    return 4.0 * sensitivity / k_mems * (1.0 + tcr * t_cm_rise) / tcr


def bias_power(vdd: float, resistance: float) -> float:
    """Per-bridge dissipation under regular bias, ``Vdd^2 / (2 R)``."""
    return vdd**2 / (2.0 * resistance)


DEFAULT_VDD = calibrated_supply_voltage()


@dataclass(frozen=True)
class SensorParameters:
    """Everything needed to build an :class:`OperatingPoint`.

    ``k_mems_per_kelvin`` carries the Grashof proportionality to the heater
    overheat, so the convective sensitivity scales with heater power.  The
    common-mode temperature is placed at ``cm_fraction`` of the heater
    overheat unless ``use_conduction_profile`` is set.
    """

    p_heater: float = HEATER_POWER
    t_ambient: float = AMBIENT_TEMPERATURE
    k_mems_per_kelvin: float = K_MEMS / (HEATER_TEMPERATURE - AMBIENT_TEMPERATURE)
    cm_fraction: float = (COMMON_MODE_TEMPERATURE - AMBIENT_TEMPERATURE) / (
        HEATER_TEMPERATURE - AMBIENT_TEMPERATURE
    )
    use_conduction_profile: bool = False
    vdd: float = DEFAULT_VDD
    noise_bandwidth: float = NOISE_BANDWIDTH
    four_resistor: bool = False
    bridge: BridgeParameters = field(default_factory=BridgeParameters)


@dataclass(frozen=True)
class OperatingPoint:
    p_heater: float
    t_ambient: float
    t_heater: float
    t_cm: float
    k_mems: float
    s_wheat: float
    sensitivity: float
    noise_density: float
    noise_bandwidth: float
    four_resistor: bool
    detector_resistance: float

    @property
    def noise_equivalent_acceleration(self) -> float:
        """Input-referred noise density in g/sqrt(Hz)."""
        if self.sensitivity == 0:
            return math.inf
        return self.noise_density / self.sensitivity

    def intrinsic_resolution(self, f_low: float = 1.0, f_high: float = 20.0) -> float:
        return intrinsic_resolution(self.noise_density, self.sensitivity, f_low, f_high)


def heater_temperature(p_heater: float, r_th_heater: float, t_ambient: float) -> float:
    if p_heater < 0:
        raise ModelError("heater power must be non-negative")
    if r_th_heater <= 0:
        raise ModelError("heater thermal resistance must be positive")
    return t_ambient + r_th_heater * p_heater


def conduction_rhs(r: float, t_heater: float, t_ambient: float, bridge: BridgeParameters) -> float:
    """Right-hand side ``C(r)`` of the cylindrical conduction law ``T + gamma T^2 / 2 = C(r)``.

    The log term enters with a negative sign so that ``C(r1)`` matches the
    heater and ``C(r2)`` matches ambient.
    """
    g = bridge.gamma
    drop = (t_heater - t_ambient) + 0.5 * g * (t_heater**2 - t_ambient**2)
    frac = math.log(r / bridge.r1) / math.log(bridge.r2 / bridge.r1)
    return t_heater + 0.5 * g * t_heater**2 - drop * frac


def conduction_temperature(
    r: float, t_heater: float, t_ambient: float, bridge: BridgeParameters
) -> float:
    # small tolerance so that r1/r2 computed through float arithmetic are accepted
    span = bridge.r2 - bridge.r1
    if not (bridge.r1 - 1e-12 * span <= r <= bridge.r2 + 1e-12 * span):
        raise ModelError(f"radius {r:g} m outside [{bridge.r1:g}, {bridge.r2:g}]")
    r = min(max(r, bridge.r1), bridge.r2)
    c = conduction_rhs(r, t_heater, t_ambient, bridge)
    disc = 1.0 + 2.0 * bridge.gamma * c
    if disc < 0:
        raise ModelError("no physical root: 1 + 2*gamma*C(r) < 0")
    # 2C / (1 + sqrt(1 + 2 gamma C)) == (-1 + sqrt(1 + 2 gamma C)) / gamma, without cancellation
    return 2.0 * c / (1.0 + math.sqrt(disc))


def calibrate_gamma(
    t_heater: float = HEATER_TEMPERATURE,
    t_ambient: float = AMBIENT_TEMPERATURE,
    t_cm: float = COMMON_MODE_TEMPERATURE,
    bridge: BridgeParameters | None = None,
) -> float:
    """Solve for ``gamma`` so the conduction profile passes through ``t_cm`` at the detector."""
    bridge = bridge or BridgeParameters()

    def resid(g):
        return conduction_temperature(bridge.r_detector, t_heater, t_ambient, replace(bridge, gamma=g)) - t_cm

    # bound |gamma| so that 1 + 2 gamma C stays positive over the whole profile
    lim = 0.999 / (2.0 * max(t_heater, t_ambient) * (1.0 + 1e-9))
    lo, hi = -lim, 1.0
    if resid(lo) * resid(hi) > 0:
        raise ModelError(f"no gamma reproduces {t_cm} K at r = {bridge.r_detector:g} m")
    return optimize.brentq(resid, lo, hi, xtol=1e-15, rtol=1e-13)


def convective_delta_t(a: float, op: OperatingPoint, validity: float = 0.1) -> float:
    """Static differential detector temperature for acceleration ``a`` (g).

    Warns when the result exceeds ``validity`` times the heater overheat,
    where the linearised convection law stops holding.
    """
    dt = op.k_mems * a
    overheat = op.t_heater - op.t_ambient
    if overheat > 0 and abs(dt) > validity * overheat:
        warnings.warn(
            f"|dT_D| = {abs(dt):.3g} K is not small against the heater overheat {overheat:.3g} K",
            stacklevel=2,
        )
    return dt


def grashof_sensitivity(gas: GasProperties, t_heater: float, t_ambient: float, s_fit: float) -> float:
    """Differential temperature per unit acceleration, in K per (m/s^2).

    Multiply by :data:`STANDARD_GRAVITY` to get K/g.
    """
    if gas.mu == 0:
        raise ModelError("zero viscosity")
    return s_fit * gas.beta * gas.rho**2 * (t_heater - t_ambient) * gas.l**3 / gas.mu**2


def fit_coefficient(k_mems: float, gas: GasProperties, t_heater: float, t_ambient: float) -> float:
    """Value of the fitting coefficient S that reproduces ``k_mems`` (K/g)."""
    unit = grashof_sensitivity(gas, t_heater, t_ambient, 1.0) * STANDARD_GRAVITY
    if unit == 0:
        raise ModelError("no heater overheat: convective sensitivity is identically zero")
    return k_mems / unit


def detector_resistances(t_cm: float, delta_t: float, bridge: BridgeParameters) -> tuple[float, float]:
    """Static detector resistances; ``t_cm`` is the rise above ambient."""
    r0, tcr = bridge.r_nominal, bridge.tcr
    return (
        r0 * (1.0 + tcr * (t_cm + 0.5 * delta_t)),
        r0 * (1.0 + tcr * (t_cm - 0.5 * delta_t)),
    )


def wheatstone_sensitivity(vdd: float, tcr: float, t_cm: float, four_resistor: bool = False) -> float:
    if vdd <= 0:
        raise ModelError("supply voltage must be positive")
    s = 0.25 * vdd * tcr / (1.0 + tcr * t_cm)
    return 2.0 * s if four_resistor else s


def johnson_noise_density(r: float, t: float) -> float:
    return math.sqrt(4.0 * BOLTZMANN * t * r)


def intrinsic_resolution(noise_density: float, sensitivity: float, f_low: float, f_high: float) -> float:
    if not f_high >= f_low >= 0:
        raise ModelError("need 0 <= f_low <= f_high")
    if sensitivity == 0:
        return math.inf
    return noise_density / sensitivity * math.sqrt(f_high - f_low)


def operating_point(params: SensorParameters | None = None, t_cm_offset: float = 0.0) -> OperatingPoint:
    """Derive the static operating point.

    ``t_cm_offset`` shifts the detector common mode (e.g. feedback self-heating).
    """
    p = params or SensorParameters()
    b = p.bridge
    t_h = heater_temperature(p.p_heater, b.r_th_heater, p.t_ambient)
    overheat = t_h - p.t_ambient
    if p.use_conduction_profile and overheat > 0:
        t_cm = conduction_temperature(b.r_detector, t_h, p.t_ambient, b)
    else:
        t_cm = p.t_ambient + p.cm_fraction * overheat
    t_cm += t_cm_offset
    rise = t_cm - p.t_ambient
    k = p.k_mems_per_kelvin * overheat
    s = wheatstone_sensitivity(p.vdd, b.tcr, rise, p.four_resistor)
    r_cm = b.r_nominal * (1.0 + b.tcr * rise)
    op = OperatingPoint(
        p_heater=p.p_heater,
        t_ambient=p.t_ambient,
        t_heater=t_h,
        t_cm=t_cm,
        k_mems=k,
        s_wheat=s,
        sensitivity=s * k,
        noise_density=johnson_noise_density(r_cm, t_cm),
        noise_bandwidth=p.noise_bandwidth,
        four_resistor=p.four_resistor,
        detector_resistance=r_cm,
    )
    if overheat > 0 and not (t_h > t_cm > p.t_ambient):
        raise ModelError("operating point must satisfy T_heater > T_cm > T_ambient")
    return op
