"""Spectral and closed-loop metrics for modulator bit-streams."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import signal as sps

from .modulator import BitStream, ModulatorConfig, simulate, simulate_chunks, sine
from .physics import SensorParameters

BAND = (1.0, 20.0)
FLOOR_BAND_LOW = 1.6e3


@dataclass
class Spectrum:
    """One-sided PSD in g^2/Hz on a uniform grid starting at DC."""

    freqs: np.ndarray
    psd: np.ndarray
    resolution_bw: float
    window: str = "hann"
    n_segments: int = 1

    def total_power(self) -> float:
        return float(np.sum(self.psd) * self.resolution_bw)


@dataclass(frozen=True)
class BandMetrics:
    band: tuple[float, float]
    rms_noise: float
    signal_rms: float
    hd3_ratio: float


class WelchAccumulator:
    """Welch averaging over blocks that arrive in pieces.

    Hann window, 50% overlap, no detrending (the DC bin is kept), density
    scaling normalised by the window's energy.  Matches
    ``scipy.signal.welch(x, window="hann", detrend=False)``.
    """

    def __init__(self, fs: float, nperseg: int, scale: float = 1.0, window: str = "hann"):
        if nperseg < 2:
            raise ValueError("nperseg must be at least 2")
        self.fs = fs
        self.nperseg = nperseg
        self.step = nperseg - nperseg // 2
        self.scale = scale
        self.window = window
        self.win = sps.get_window(window, nperseg)
        self.acc = np.zeros(nperseg // 2 + 1)
        self.count = 0
        self._buf = np.empty(0)

    def feed(self, x) -> None:
        x = np.asarray(x, dtype=np.float64)
        buf = np.concatenate([self._buf, x]) if self._buf.size else x
        pos = 0
        while buf.size - pos >= self.nperseg:
            seg = buf[pos:pos + self.nperseg]
            self.acc += np.abs(np.fft.rfft(seg * self.win)) ** 2
            self.count += 1
            pos += self.step
        self._buf = buf[pos:].copy()

    def result(self) -> Spectrum:
        if self.count < 2:
            raise ValueError(f"need at least 2 segments of {self.nperseg} samples, got {self.count}")
        psd = self.acc / (self.count * self.fs * np.sum(self.win**2))
        if self.nperseg % 2:
            psd[1:] *= 2
        else:
            psd[1:-1] *= 2
        freqs = np.fft.rfftfreq(self.nperseg, 1.0 / self.fs)
        return Spectrum(freqs, psd * self.scale**2, self.fs / self.nperseg, self.window, self.count)


def segment_length(f_s: float, resolution_bw: float) -> int:
    return int(math.ceil(f_s / resolution_bw))


def psd(
    stream: BitStream,
    window: str = "hann",
    n_segments: int | None = None,
    resolution_bw: float = 0.5,
) -> Spectrum:
    """Welch PSD of ``stream.bits * stream.scale``.

    ``n_segments`` (50% overlap) takes precedence over ``resolution_bw``.
    """
    n = len(stream)
    if n == 0:
        raise ValueError("empty bit-stream")
    if n_segments is not None:
        nperseg = int(2 * n // (n_segments + 1))
    else:
        nperseg = segment_length(stream.f_ck, resolution_bw)
    acc = WelchAccumulator(stream.f_ck, nperseg, stream.scale, window)
    acc.feed(stream.bits)
    return acc.result()


def psd_chunks(chunks: Iterable[np.ndarray], f_ck: float, scale: float, resolution_bw: float = 0.5) -> Spectrum:
    """PSD of a bit-stream that is never held in memory at once."""
    acc = WelchAccumulator(f_ck, segment_length(f_ck, resolution_bw), scale)
    for c in chunks:
        acc.feed(c)
    return acc.result()


def ntf_magnitude(f, f_ck: float, tau_d: float | None = None):
    """Linearised noise transfer magnitude; ``tau_d=None`` gives the ideal integrator."""
    f = np.asarray(f, dtype=float)
    pole = 1.0 if tau_d is None else math.exp(-1.0 / (f_ck * tau_d))
    return np.abs(1.0 - pole * np.exp(-2j * np.pi * f / f_ck))


def _bin_mask(spec: Spectrum, f_low: float, f_high: float) -> np.ndarray:
    nyq = spec.freqs[-1]
    if f_low < 0 or f_high > nyq * (1 + 1e-12) or f_high < f_low:
        raise ValueError(f"band [{f_low:g}, {f_high:g}] Hz outside spectrum [0, {nyq:g}]")
    return (spec.freqs >= f_low - 1e-9) & (spec.freqs <= f_high + 1e-9)


def harmonic_exclusions(f0: float, resolution_bw: float, harmonics: int = 5, bins: int = 3):
    """``(center, halfwidth)`` pairs covering ``f0`` and harmonics 2..``harmonics``."""
    return [(k * f0, bins * resolution_bw) for k in range(1, harmonics + 1)]


def band_rms(spec: Spectrum, f_low: float, f_high: float, exclude: Sequence[tuple[float, float]] = ()) -> float:
    mask = _bin_mask(spec, f_low, f_high)
    for center, half in exclude:
        mask &= np.abs(spec.freqs - center) > half + 1e-9
    return math.sqrt(float(np.sum(spec.psd[mask])) * spec.resolution_bw)


def noise_floor(spec: Spectrum, f_low: float = FLOOR_BAND_LOW, f_high: float | None = None) -> float:
    """Average noise density (g/sqrt(Hz)) over a band, Nyquist by default."""
    f_high = spec.freqs[-1] if f_high is None else f_high
    mask = _bin_mask(spec, f_low, f_high)
    return math.sqrt(float(np.mean(spec.psd[mask])))


def quantization_noise_density(signal_rms: float, f_ck: float, full_scale: float) -> float:
    """Unshaped noise density when the constant bit-stream power ``full_scale^2``
    is shared between the signal and white quantisation noise."""
    if signal_rms > full_scale:
        raise ValueError("signal RMS cannot exceed the bit-stream RMS")
    return math.sqrt(full_scale**2 - signal_rms**2) / math.sqrt(0.5 * f_ck)


def _group_power(spec: Spectrum, center: float, bins: int, guard: int = 20) -> float:
    """Power in ``center +- bins`` minus the local median floor."""
    k = int(round(center / spec.resolution_bw))
    lo, hi = max(0, k - bins), min(spec.psd.size, k + bins + 1)
    ring = np.concatenate([spec.psd[max(0, lo - guard):lo], spec.psd[hi:hi + guard]])
    floor = float(np.median(ring)) if ring.size else 0.0
    return float(np.sum(spec.psd[lo:hi]) - floor * (hi - lo)) * spec.resolution_bw


def signal_rms(spec: Spectrum, f0: float, bins: int = 3) -> float:
    return math.sqrt(max(_group_power(spec, f0, bins), 0.0))


def harmonic_distortion(spec: Spectrum, f0: float, order: int = 3, bins: int = 3) -> float:
    """Amplitude ratio of harmonic ``order`` to the fundamental, floor-corrected."""
    if order * f0 + bins * spec.resolution_bw > spec.freqs[-1]:
        raise ValueError("harmonic above Nyquist")
    p1 = _group_power(spec, f0, bins)
    if p1 <= 0:
        return 0.0
    return math.sqrt(max(_group_power(spec, order * f0, bins), 0.0) / p1)


def band_metrics(spec: Spectrum, f0: float, band: tuple[float, float] = BAND, bins: int = 3) -> BandMetrics:
    exclude = harmonic_exclusions(f0, spec.resolution_bw, bins=bins)
    return BandMetrics(
        band=band,
        rms_noise=band_rms(spec, band[0], band[1], exclude),
        signal_rms=signal_rms(spec, f0, bins),
        hd3_ratio=min(1.0, harmonic_distortion(spec, f0, 3, bins)),
    )


def sine_spectrum(
    config: ModulatorConfig,
    f0: float = 16.0,
    amplitude: float = 1.0,
    sensor: SensorParameters | None = None,
    resolution_bw: float = 0.5,
) -> Spectrum:
    """Simulate a sine input and estimate the output spectrum without keeping the stream."""
    chunks = simulate_chunks(config, sine(f0, amplitude), sensor)
    return psd_chunks(chunks, config.f_ck, config.full_scale, resolution_bw)


def shape_deviation_db(spec: Spectrum, model, f_low: float, f_high: float, n_bands: int = 12) -> np.ndarray:
    """Per-band dB mismatch between ``spec`` and ``model(freqs)`` after fitting one level.

    Power is averaged over ``n_bands`` log-spaced bands so that tones and
    estimator scatter do not dominate the comparison.  The level is the
    minimax one, so ``max(abs(result))`` is the smallest tolerance within
    which the two shapes agree up to a constant factor.
    """
    edges = np.geomspace(f_low, f_high, n_bands + 1)
    meas, pred = [], []
    ref = model(spec.freqs)
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (spec.freqs >= lo) & (spec.freqs < hi)
        if not m.any():
            continue
        meas.append(np.mean(spec.psd[m]))
        pred.append(np.mean(ref[m]))
    diff = 10 * np.log10(np.array(meas)) - 10 * np.log10(np.array(pred))
    return diff - 0.5 * (diff.max() + diff.min())


# closed-loop drivers -----------------------------------------------------------


def _coherent_gain(config: ModulatorConfig, f: float, amp: float, sensor, min_duration: float) -> float:
    periods = max(4, math.ceil(min_duration * f))
    n = int(round(periods * config.f_ck / f))
    cfg = replace(config, duration=n / config.f_ck)
    bits = simulate(cfg, sine(f, amp), sensor).bits
    t = np.arange(bits.size) / config.f_ck
    c = 2.0 * config.full_scale * np.mean(bits * np.exp(-2j * np.pi * f * t))
    return abs(c) / amp


def stf_measure(
    config: ModulatorConfig,
    freqs: Sequence[float],
    amp: float = 1.0,
    sensor: SensorParameters | None = None,
    seeds: Sequence[int] = (0,),
    min_duration: float = 0.5,
) -> list[tuple[float, float]]:
    """Measured signal transfer ``[(f, gain_db)]`` of the modulator itself.

    The fluid lag is bypassed: it filters the acceleration before it
    reaches the loop and is not part of the modulator's transfer.
    """
    if amp >= config.full_scale:
        raise ValueError("amplitude must stay below full scale")
    cfg = replace(config, fluid_lag=False)
    out = []
    for f in freqs:
        if not 0 < f < 0.5 * config.f_ck:
            raise ValueError(f"frequency {f:g} Hz outside (0, f_ck/2)")
        g = np.mean([_coherent_gain(replace(cfg, seed=s), f, amp, sensor, min_duration) for s in seeds])
        out.append((float(f), 20 * math.log10(g)))
    return out


def corner_frequency(table: Sequence[tuple[float, float]], drop_db: float = 3.0, ref_db: float | None = None) -> float:
    """First frequency where the gain falls ``drop_db`` below ``ref_db`` (lowest-frequency gain by default).

    Interpolates linearly in log-frequency; ``nan`` if never reached.
    """
    f = np.array([r[0] for r in table])
    g = np.array([r[1] for r in table])
    target = (g[0] if ref_db is None else ref_db) - drop_db
    below = np.nonzero(g <= target)[0]
    if below.size == 0:
        return float("nan")
    i = below[0]
    if i == 0:
        return float(f[0])
    x0, x1 = math.log(f[i - 1]), math.log(f[i])
    return math.exp(x0 + (target - g[i - 1]) * (x1 - x0) / (g[i] - g[i - 1]))


@dataclass(frozen=True)
class SweepRow:
    fck_hz: float
    resolution_g: float
    stddev_g: float
    n_seeds: int


def _resolution_job(args) -> float:
    config, sensor, f0, amp, band = args
    spec = sine_spectrum(config, f0, amp, sensor)
    return band_metrics(spec, f0, band).rms_noise


def resolution_vs_fck(
    base: ModulatorConfig,
    fcks: Sequence[float],
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    sensor: SensorParameters | None = None,
    f0: float = 16.0,
    amp: float = 1.0,
    band: tuple[float, float] = BAND,
    workers: int = 1,
) -> list[SweepRow]:
    """Seed-averaged in-band resolution for each clock frequency, ordered by ``fcks``."""
    jobs = [(replace(base, f_ck=fck, seed=s), sensor, f0, amp, band) for fck in fcks for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            res = list(ex.map(_resolution_job, jobs))
    else:
        res = [_resolution_job(j) for j in jobs]
    rows = []
    k = len(seeds)
    for i, fck in enumerate(fcks):
        r = np.array(res[i * k:(i + 1) * k])
        rows.append(SweepRow(float(fck), float(r.mean()), float(r.std(ddof=1)) if k > 1 else 0.0, k))
    return rows


def slope_db_per_octave(fcks: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``20 log10(values)`` against ``log2(fcks)``."""
    return float(np.polyfit(np.log2(fcks), 20 * np.log10(values), 1)[0])


# CSV output --------------------------------------------------------------------


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + f".{os.getpid()}.part")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in r])
    tmp.replace(path)
    return path


def write_spectrum_csv(path, spec: Spectrum) -> Path:
    return _write_csv(path, ("freq_hz", "psd_g2_per_hz"), zip(spec.freqs.tolist(), spec.psd.tolist()))


def write_sweep_csv(path, rows: Sequence[SweepRow]) -> Path:
    return _write_csv(
        path,
        ("fck_hz", "resolution_g", "stddev_g", "n_seeds"),
        ((r.fck_hz, r.resolution_g, r.stddev_g, r.n_seeds) for r in rows),
    )


def write_stf_csv(path, table: Sequence[tuple[float, float]]) -> Path:
    return _write_csv(path, ("freq_hz", "gain_db"), table)


def write_ntf_csv(path, freqs, f_ck: float, tau_d: float) -> Path:
    th = 20 * np.log10(ntf_magnitude(freqs, f_ck, tau_d))
    with np.errstate(divide="ignore"):
        ideal = 20 * np.log10(ntf_magnitude(freqs, f_ck))
    return _write_csv(
        path,
        ("freq_hz", "ntf_thermal_db", "ntf_ideal_db"),
        zip(np.asarray(freqs, float).tolist(), th.tolist(), ideal.tolist()),
    )
