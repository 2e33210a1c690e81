"""Command-line experiment runner.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis as an
from . import config as cfgmod
from .modulator import ElectroThermalModulator, parse_input_spec, write_packed
from .physics import ModelError, operating_point

FIGURES = ("ntf7", "spectrum8", "stf9", "sweep10")


def _fmt(x: float, unit: str, scale: float = 1.0) -> str:
    return f"{x / scale:.4g} {unit}"


def cmd_operating_point(cfg: cfgmod.ExperimentConfig, out=None) -> dict:
    report = {}
    band = cfg.band()
    for four in (False, True):
        op = operating_point(replace(cfg.sensor(), four_resistor=four))
        res = op.intrinsic_resolution(*band)
        label = "4-resistor" if four else "2-resistor"
        report[label] = {
            "t_heater_k": op.t_heater,
            "t_cm_k": op.t_cm,
            "k_mems_k_per_g": op.k_mems,
            "s_wheat_v_per_k": op.s_wheat,
            "sensitivity_v_per_g": op.sensitivity,
            "noise_density_v_per_rthz": op.noise_density,
            "intrinsic_resolution_g": res,
        }
        print(f"[{label} bridge]", file=out)
        print(f"  heater temperature      {op.t_heater:.1f} K", file=out)
        print(f"  common-mode temperature {op.t_cm:.1f} K", file=out)
        print(f"  K_MEMS                  {op.k_mems:.4g} K/g", file=out)
        print(f"  S_wheat                 {_fmt(op.s_wheat, 'mV/K', 1e-3)}", file=out)
        print(f"  sensitivity             {_fmt(op.sensitivity, 'mV/g', 1e-3)}", file=out)
        print(f"  Johnson noise           {_fmt(op.noise_density, 'nV/rtHz', 1e-9)}", file=out)
        if math.isfinite(res):
            print(f"  intrinsic resolution    {_fmt(res, 'ug rms', 1e-6)} ({band[0]:g}-{band[1]:g} Hz)", file=out)
        else:
            print("  intrinsic resolution    undefined (zero sensitivity)", file=out)
    return report


def _spectrum8(cfg, integrator=None):
    mod = cfg.modulator(**({"integrator": integrator} if integrator else {}))
    sensor = cfg.sensor()
    specs, metrics = [], []
    for s in cfg.seeds():
        sp = an.sine_spectrum(replace(mod, seed=s), cfg.f0, cfg.amplitude, sensor, cfg.resolution_bw)
        specs.append(sp)
        metrics.append(an.band_metrics(sp, cfg.f0, cfg.band()))
    mean = replace(specs[0], psd=np.mean([s.psd for s in specs], axis=0))
    return mean, specs, metrics


def cmd_figure(cfg: cfgmod.ExperimentConfig, figure: str, out=None) -> dict:
    if figure not in FIGURES:
        raise cfgmod.ConfigError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    result = {}

    if figure == "ntf7":
        freqs = np.geomspace(0.1, cfg.f_ck / 2, 400)
        path = an.write_ntf_csv(outdir / "ntf7.csv", freqs, cfg.f_ck, cfg.tau_d)
        dc_gain = float(an.ntf_magnitude(0.0, cfg.f_ck, cfg.tau_d))
        # flat to within 3 dB up to where |NTF| has grown by sqrt(2)
        pole = math.exp(-1 / (cfg.f_ck * cfg.tau_d))
        fine = np.linspace(0, cfg.f_ck / 2, 200001)
        corner = float(fine[np.argmax(an.ntf_magnitude(fine, cfg.f_ck, cfg.tau_d) >= math.sqrt(2) * dc_gain)])
        result = {"ntf_thermal_dc": dc_gain, "pole": pole, "flat_corner_hz": corner}
        print(f"thermal NTF at DC: {dc_gain:.4g} ({20 * math.log10(dc_gain):.1f} dB), pole {pole:.6f}", file=out)
        print(f"thermal NTF flat (3 dB) up to {corner:.1f} Hz", file=out)

    elif figure == "spectrum8":
        mean, specs, metrics = _spectrum8(cfg)
        path = an.write_spectrum_csv(outdir / f"spectrum8_{cfg.integrator}.csv", mean)
        res = [m.rms_noise for m in metrics]
        floor = float(np.mean([an.noise_floor(s) for s in specs]))
        hd3 = [m.hd3_ratio for m in metrics]
        pred = an.quantization_noise_density(cfg.amplitude / math.sqrt(2), cfg.f_ck, cfg.full_scale)
        result = {
            "resolution_g": float(np.mean(res)),
            "resolution_per_seed_g": res,
            "floor_g_per_rthz": floor,
            "floor_predicted_g_per_rthz": pred,
            "hd3_ratio": float(np.mean(hd3)),
        }
        print(
            f"{cfg.integrator} integrator, f_ck = {cfg.f_ck:g} Hz, {len(res)} seed(s): "
            f"resolution {np.mean(res) * 1e3:.3f} mg rms over {cfg.band_low:g}-{cfg.band_high:g} Hz",
            file=out,
        )
        print(f"noise floor {an.FLOOR_BAND_LOW:g} Hz - f_ck/2: {floor * 1e3:.3f} mg/rtHz "
              f"(constant-power estimate {pred * 1e3:.3f} mg/rtHz)", file=out)
        print(f"HD3: {np.mean(hd3) * 100:.3f} % of the fundamental", file=out)

    elif figure == "stf9":
        mod = cfg.modulator()
        sensor = cfg.sensor()
        tables = {}
        for integ in ("thermal", "ideal"):
            tab = an.stf_measure(replace(mod, integrator=integ), cfg.stf_freqs, cfg.amplitude, sensor, cfg.seeds())
            tables[integ] = tab
            an.write_stf_csv(outdir / f"stf9_{integ}.csv", tab)
        path = outdir / "stf9_thermal.csv"
        for integ, tab in tables.items():
            fc = an.corner_frequency(tab)
            result[f"{integ}_corner_hz"] = fc
            result[f"{integ}_lf_gain_db"] = tab[0][1]
            print(f"{integ}: low-frequency gain {tab[0][1]:+.3f} dB, -3 dB at {fc:.0f} Hz", file=out)
        deficit = tables["ideal"][0][1] - tables["thermal"][0][1]
        result["thermal_gain_deficit_db"] = deficit
        print(f"thermal loop sits {deficit:.3f} dB below the ideal loop at {cfg.stf_freqs[0]:g} Hz", file=out)

    else:
        rows = _sweep(cfg)
        path = an.write_sweep_csv(outdir / "sweep10.csv", rows)
        result = {"rows": [r.__dict__ for r in rows]}
        for r in rows:
            print(f"f_ck {r.fck_hz:>12.0f} Hz: {r.resolution_g * 1e6:9.1f} ug rms (sd {r.stddev_g * 1e6:.1f})", file=out)
        if len(rows) > 1:
            slope = an.slope_db_per_octave([r.fck_hz for r in rows], [r.resolution_g for r in rows])
            result["slope_db_per_octave"] = slope
            print(f"slope: {slope:+.2f} dB/octave", file=out)

    print(f"wrote {path}", file=out)
    return result


def _sweep(cfg):
    mod = cfg.modulator()
    return an.resolution_vs_fck(
        mod, cfg.sweep_fck, cfg.seeds(), cfg.sensor(), cfg.f0, cfg.amplitude, cfg.band(), cfg.workers
    )


def cmd_simulate(cfg: cfgmod.ExperimentConfig, input_spec: str, text: bool = False, out=None) -> dict:
    try:
        sig = parse_input_spec(input_spec)
    except ValueError as exc:
        raise cfgmod.ConfigError(str(exc)) from exc
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    mod = cfg.modulator()
    loop = ElectroThermalModulator(mod, cfg.sensor())
    stats = {"n": 0, "sum": 0}
    acc = an.WelchAccumulator(mod.f_ck, an.segment_length(mod.f_ck, cfg.resolution_bw), mod.full_scale)
    text_fh = open(outdir / "bitstream.txt", "w") if text else None

    def tee():
        for c in loop.chunks(sig):
            stats["n"] += c.size
            stats["sum"] += int(c.sum(dtype=np.int64))
            acc.feed(c)
            if text_fh:
                text_fh.write("".join("1\n" if b > 0 else "0\n" for b in c.tolist()))
            yield c

    try:
        write_packed(outdir / "bitstream.tsdb", tee(), mod.f_ck, mod.full_scale, mod.seed)
    finally:
        if text_fh:
            text_fh.close()
    mean = stats["sum"] / stats["n"]
    metrics = {
        "input": input_spec,
        "f_ck_hz": mod.f_ck,
        "full_scale_g": mod.full_scale,
        "integrator": mod.integrator,
        "seed": mod.seed,
        "n_bits": stats["n"],
        "mean_bit": mean,
        "mean_acceleration_g": mean * mod.full_scale,
        "duty_cycle": loop.duty,
    }
    if acc.count >= 2:
        spec = acc.result()
        metrics["noise_floor_g_per_rthz"] = an.noise_floor(spec, min(an.FLOOR_BAND_LOW, spec.freqs[-1]))
        kind, _, arg = input_spec.partition(":")
        if kind == "sine":
            f0 = float(arg.split(",")[0])
            m = an.band_metrics(spec, f0, cfg.band())
            metrics.update(resolution_g=m.rms_noise, signal_rms_g=m.signal_rms, hd3_ratio=m.hd3_ratio)
        else:
            metrics["resolution_g"] = an.band_rms(spec, *cfg.band())
    (outdir / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    print(json.dumps(metrics, indent=2, sort_keys=True), file=out)
    return metrics


def cmd_sweep(cfg: cfgmod.ExperimentConfig, out=None) -> dict:
    return cmd_figure(cfg, "sweep10", out)


def _common(p: argparse.ArgumentParser, fck_list: bool = False) -> None:
    d = cfgmod.ExperimentConfig()
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int, help=f"first PRNG seed (default {d.seed})")
    p.add_argument("--seeds", type=int, help=f"number of seeds averaged (default {d.n_seeds})")
    p.add_argument("--out", help=f"output directory (default {d.out!r})")
    if fck_list:
        p.add_argument("--fck", help="comma-separated clock frequencies, Hz (default 10 kHz ... 8.4 MHz)")
    else:
        p.add_argument("--fck", type=float, help=f"clock frequency, Hz (default {d.f_ck:g}, the 131 kHz test clock)")
    p.add_argument("--full-scale", type=float, help=f"full scale, g (default +-{d.full_scale:g} g)")
    p.add_argument("--no-noise", action="store_true", help="disable comparator Johnson noise")
    p.add_argument("--integrator", choices=("thermal", "ideal"), help="loop filter (default thermal)")
    p.add_argument("--duration", type=float, help=f"simulated seconds (default {d.duration:g})")
    p.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override any configuration key (see 'thermosd config')",
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="thermosd",
        description="Convective accelerometer with a first-order electro-thermal sigma-delta modulator.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Defaults: 42 mW heater (720 K, T_cm 423 K), K_MEMS 1.53 K/g, TCR 9e-4/K, 50 kohm detectors, "
        "tau_d 3.3 ms, R_th 1e4 K/W, P0 225 uW, Pmax 900 uW, f_ck 131 kHz, +-2 g, 16 Hz / 1 g test sine.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("operating-point", help="static sensor figures for both bridge variants")
    _common(p)
    p = sub.add_parser("figure", help="data behind one of the closed-loop figures")
    p.add_argument("name", help="ntf7 (noise transfer), spectrum8 (bit-stream PSD), stf9 (signal transfer), "
                   "sweep10 (resolution vs clock)")
    _common(p, fck_list=False)
    p = sub.add_parser("simulate", help="simulate one input and write the bit-stream")
    p.add_argument("--input", required=True, help="dc:A | sine:F,A | file:PATH (columns: time s, acceleration g)")
    p.add_argument("--text", action="store_true", help="also write the stream as 0/1 lines")
    _common(p)
    p = sub.add_parser("sweep", help="resolution over 1-20 Hz versus clock frequency")
    _common(p, fck_list=True)
    p = sub.add_parser("config", help="print every configuration key with its default")
    _common(p)
    return ap


def _overrides(args) -> dict:
    ov = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise cfgmod.ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        ov[key.strip()] = value
    flag_map = {"seed": "seed", "seeds": "n_seeds", "out": "out", "full_scale": "full_scale",
                "integrator": "integrator", "duration": "duration"}
    for attr, key in flag_map.items():
        v = getattr(args, attr, None)
        if v is not None:
            ov[key] = v
    if args.no_noise:
        ov["noise_enabled"] = False
    if args.fck is not None:
        if args.command == "sweep":
            ov["sweep_fck"] = str(args.fck)
        else:
            ov["f_ck"] = args.fck
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config, _overrides(args))
        if args.command == "operating-point":
            cmd_operating_point(cfg)
        elif args.command == "figure":
            if args.name not in FIGURES:
                raise cfgmod.ConfigError(f"unknown figure {args.name!r}; choose from {', '.join(FIGURES)}")
            cmd_figure(cfg, args.name)
        elif args.command == "simulate":
            cmd_simulate(cfg, args.input, args.text)
        elif args.command == "sweep":
            cmd_sweep(cfg)
        else:
            sys.stdout.write(cfgmod.dumps(cfg))
    except (cfgmod.ConfigError, ModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
