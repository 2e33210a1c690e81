"""Flat ``key = value`` experiment configuration.

Every key has a default matching the prototype operating point and the
closed-loop test conditions (131 kHz clock, +-2 g full scale, 16 Hz / 1 g
sine).  Lines starting with ``#`` and trailing ``# ...`` comments are ignored.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .modulator import ModulatorConfig, duty_for_full_scale
from .physics import BridgeParameters, SensorParameters, operating_point


class ConfigError(ValueError):
    pass


_SENSOR = SensorParameters()
_BRIDGE = BridgeParameters()
_MOD = ModulatorConfig()


@dataclass
class ExperimentConfig:
    # sensor
    p_heater: float = field(default=_SENSOR.p_heater, metadata={"doc": "heater power, W (prototype: 42 mW)"})
    t_ambient: float = field(default=_SENSOR.t_ambient, metadata={"doc": "ambient temperature, K (assumed)"})
    k_mems_per_kelvin: float = field(
        default=_SENSOR.k_mems_per_kelvin,
        metadata={"doc": "convective sensitivity per K of heater overheat, K/g/K (1.53 K/g at 720 K)"},
    )
    cm_fraction: float = field(
        default=_SENSOR.cm_fraction, metadata={"doc": "detector common-mode rise / heater overheat (423 K at 720 K)"}
    )
    use_conduction_profile: bool = field(default=False, metadata={"doc": "place T_cm with the conduction model"})
    vdd: float = field(default=_SENSOR.vdd, metadata={"doc": "bridge supply, V (calibrated to 1.55 mV/g)"})
    noise_bandwidth: float = field(default=_SENSOR.noise_bandwidth, metadata={"doc": "comparator noise bandwidth, Hz (6 MHz)"})
    four_resistor: bool = field(default=False, metadata={"doc": "loop uses the 4-resistor bridge (3.1 mV/g)"})
    # bridge
    r_th_heater: float = field(default=_BRIDGE.r_th_heater, metadata={"doc": "heater thermal resistance, K/W (from 42 mW -> 720 K)"})
    r_th_detector: float = field(default=_BRIDGE.r_th_detector, metadata={"doc": "detector thermal resistance, K/W (1e4)"})
    tau_d: float = field(default=_BRIDGE.tau_d, metadata={"doc": "detector time constant, s (3.3 ms)"})
    tcr: float = field(default=_BRIDGE.tcr, metadata={"doc": "polysilicon TCR, 1/K (9e-4)"})
    r_nominal: float = field(default=_BRIDGE.r_nominal, metadata={"doc": "detector resistance at ambient, ohm (50 kohm at T_cm)"})
    gamma: float = field(default=_BRIDGE.gamma, metadata={"doc": "conduction nonlinearity, 1/K"})
    r1: float = field(default=_BRIDGE.r1, metadata={"doc": "inner conduction radius, m (placeholder)"})
    r2: float = field(default=_BRIDGE.r2, metadata={"doc": "outer conduction radius, m (placeholder)"})
    r_detector: float = field(default=_BRIDGE.r_detector, metadata={"doc": "detector distance, m (placeholder)"})
    # modulator
    f_ck: float = field(default=_MOD.f_ck, metadata={"doc": "clock frequency, Hz (131 kHz)"})
    full_scale: float = field(default=_MOD.full_scale, metadata={"doc": "full scale, g (+-2 g)"})
    integrator: str = field(default=_MOD.integrator, metadata={"doc": "thermal | ideal"})
    noise_enabled: bool = field(default=True, metadata={"doc": "inject Johnson noise at the comparator"})
    seed: int = field(default=0, metadata={"doc": "first PRNG seed"})
    n_seeds: int = field(default=5, metadata={"doc": "number of consecutive seeds averaged"})
    duration: float = field(default=_MOD.duration, metadata={"doc": "simulated time after settling, s"})
    p0: float = field(default=_MOD.p0, metadata={"doc": "bias power per bridge, W (225 uW)"})
    p_max: float = field(default=_MOD.p_max, metadata={"doc": "feedback power, W (900 uW)"})
    fluid_lag: bool = field(default=True, metadata={"doc": "apply the fluid lag to the acceleration input"})
    tau_fluid: float = field(default=_MOD.tau_fluid, metadata={"doc": "fluid time constant, s (0.5-12 ms range)"})
    settle: float = field(default=5 * _BRIDGE.tau_d, metadata={"doc": "discarded settling time, s (5 tau_d)"})
    noise_aliasing: str = field(default=_MOD.noise_aliasing, metadata={"doc": "wideband | nyquist"})
    self_heating: bool = field(default=True, metadata={"doc": "shift T_cm by the average feedback power"})
    bit_budget: int = field(default=_MOD.bit_budget, metadata={"doc": "largest stream held in memory, bits"})
    # experiment
    f0: float = field(default=16.0, metadata={"doc": "test sine frequency, Hz (16 Hz)"})
    amplitude: float = field(default=1.0, metadata={"doc": "test sine amplitude, g (1 g)"})
    band_low: float = field(default=1.0, metadata={"doc": "resolution band start, Hz"})
    band_high: float = field(default=20.0, metadata={"doc": "resolution band end, Hz"})
    resolution_bw: float = field(default=0.5, metadata={"doc": "PSD bin width, Hz"})
    sweep_fck: list = field(
        default_factory=lambda: [10e3, 32.75e3, 131e3, 524e3, 2.096e6, 8.384e6],
        metadata={"doc": "clock frequencies for sweep10, Hz (10 kHz - 8.4 MHz)"},
    )
    stf_freqs: list = field(
        default_factory=lambda: [10.0, 50.0, 200.0, 500.0, 800.0, 1100.0, 1400.0, 1700.0, 2000.0, 3000.0, 5000.0],
        metadata={"doc": "STF measurement frequencies, Hz"},
    )
    workers: int = field(default=1, metadata={"doc": "parallel processes for sweeps"})
    out: str = field(default="out", metadata={"doc": "output directory"})

    def seeds(self) -> list[int]:
        return list(range(self.seed, self.seed + self.n_seeds))

    def bridge(self) -> BridgeParameters:
        return BridgeParameters(**{f.name: getattr(self, f.name) for f in fields(BridgeParameters)})

    def sensor(self) -> SensorParameters:
        kw = {f.name: getattr(self, f.name) for f in fields(SensorParameters) if f.name != "bridge"}
        return SensorParameters(bridge=self.bridge(), **kw)

    def modulator(self, **override) -> ModulatorConfig:
        kw = {f.name: getattr(self, f.name) for f in fields(ModulatorConfig) if hasattr(self, f.name)}
        kw.update(override)
        return ModulatorConfig(**kw)

    def band(self) -> tuple[float, float]:
        return (self.band_low, self.band_high)

    def validate(self) -> ExperimentConfig:
        try:
            mod = self.modulator()
            sensor = self.sensor()
            k_mems = operating_point(sensor).k_mems
            if k_mems > 0:
                duty_for_full_scale(mod.full_scale, mod.p_max, sensor.bridge.r_th_detector, k_mems)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be at least 1")
        return self


FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    f = FIELDS[name]
    default = f.default_factory() if f.default is dataclasses.MISSING else f.default
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            return [float(v) for v in raw.replace(";", ",").split(",") if v.strip()]
        return raw
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def apply(cfg: ExperimentConfig, items: dict[str, str]) -> ExperimentConfig:
    for key, raw in items.items():
        if key not in FIELDS:
            raise ConfigError(f"unknown configuration key {key!r}")
        setattr(cfg, key, _coerce(key, raw) if isinstance(raw, str) else raw)
    return cfg


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    items = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        items[key.strip()] = value.strip()
    return items


def load(path=None, overrides: dict | None = None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        apply(cfg, parse_text(text, str(path)))
    if overrides:
        apply(cfg, overrides)
    return cfg.validate()


def dumps(cfg: ExperimentConfig) -> str:
    lines = []
    for name, f in FIELDS.items():
        v = getattr(cfg, name)
        if isinstance(v, list):
            v = ", ".join(f"{x:g}" for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{name} = {v}  # {f.metadata.get('doc', '')}")
    return "\n".join(lines) + "\n"
