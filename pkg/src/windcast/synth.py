"""Labelled synthetic SCADA generator built on the cubic turbine power curve."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .ingest import ScadaSeries, write_csv

BETZ_LIMIT = 0.593
OUTLIER_KINDS = ("stuck-at", "scaled", "random")


@dataclass(frozen=True)
class TurbineSpec:
    rho: float = 1.225  # kg/m^3
    rotor_radius: float = 45.0  # m
    cp: float = 0.4
    cut_in: float = 3.0  # m/s
    rated: float = 11.0
    cut_out: float = 25.0
    rated_power: float = 2.0e6  # W

    def __post_init__(self):
        if not self.cut_in < self.rated < self.cut_out:
            raise ValueError("need cut_in < rated < cut_out")
        if not 0.0 < self.cp <= BETZ_LIMIT:
            raise ValueError(f"cp must lie in (0, {BETZ_LIMIT}]")


def power_curve(spec: TurbineSpec, u) -> np.ndarray:
    """Power in W: 1/2 rho pi R^2 cp u^3 inside [cut_in, cut_out), capped at rated power."""
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0):
        raise ValueError("wind speed must be non-negative")
    cubic = 0.5 * spec.rho * np.pi * spec.rotor_radius ** 2 * spec.cp * u ** 3
    p = np.minimum(cubic, spec.rated_power)
    p = np.where(u >= spec.rated, spec.rated_power, p)
    return np.where((u < spec.cut_in) | (u >= spec.cut_out), 0.0, p)


@dataclass(frozen=True)
class SynthConfig:
    n_records: int = 20_000
    cadence: float = 600.0
    start: float = 1356998400.0  # 2013-01-01T00:00:00Z
    weibull_shape: float = 2.0
    weibull_scale: float = 8.0
    smoothing: int = 3
    dir_modes: tuple = (315.0, 135.0)  # NW dominant, SE secondary
    dir_weights: tuple = (0.65, 0.35)
    dir_kappa: float = 4.0
    dir_effect: float = 0.03
    noise_frac: float = 0.01  # noise std as a fraction of rated power
    noise_autocorr: float = 0.0
    spinup_frac: float = 0.005
    outlier_rate: float = 0.0
    outlier_kind: str = "random"
    outlier_factor: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.outlier_rate <= 0.2:
            raise ValueError("outlier_rate must lie in [0, 0.2]")
        if self.outlier_kind not in OUTLIER_KINDS:
            raise ValueError(f"outlier_kind must be one of {OUTLIER_KINDS}")
        if self.n_records < 1:
            raise ValueError("n_records must be positive")
        if not 0.0 <= self.noise_autocorr < 1.0:
            raise ValueError("noise_autocorr must lie in [0, 1)")


def _directions(cfg: SynthConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    w = np.asarray(cfg.dir_weights, dtype=np.float64)
    mode = rng.choice(len(cfg.dir_modes), size=n, p=w / w.sum())
    mu = np.radians(np.asarray(cfg.dir_modes))[mode]
    theta = rng.vonmises(mu, cfg.dir_kappa)
    return np.degrees(theta) % 360.0


def _noise(cfg: SynthConfig, rng: np.random.Generator, n: int, sigma: float) -> np.ndarray:
    e = rng.normal(0.0, sigma, size=n)
    phi = cfg.noise_autocorr
    if phi == 0.0:
        return e
    out = np.empty(n)
    out[0] = e[0]
    innov = np.sqrt(1.0 - phi * phi)
    for k in range(1, n):
        out[k] = phi * out[k - 1] + innov * e[k]
    return out


def generate(spec: TurbineSpec = TurbineSpec(), cfg: SynthConfig = SynthConfig()):
    """Return ``(series, outlier_indices)``.  Power is reported in kW.

    Clean power stays within [-3 sigma, rated]; labelled outliers deviate from
    the clean value by at least 5 sigma.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_records
    k = max(1, cfg.smoothing)
    raw = cfg.weibull_scale * rng.weibull(cfg.weibull_shape, size=n + k - 1)
    u = np.convolve(raw, np.ones(k) / k, mode="valid")
    direction = _directions(cfg, rng, n)

    sigma = cfg.noise_frac * spec.rated_power
    ideal = power_curve(spec, u)
    ideal = ideal * (1.0 + cfg.dir_effect * np.cos(np.radians(direction - cfg.dir_modes[0])))
    ideal = np.minimum(ideal, spec.rated_power)
    producing = ideal > 0
    clean = np.where(producing, ideal + _noise(cfg, rng, n, sigma), 0.0)
    idle = np.flatnonzero(~producing & (u < spec.cut_in))
    n_spin = int(round(cfg.spinup_frac * n))
    if n_spin and len(idle):
        spin = rng.choice(idle, size=min(n_spin, len(idle)), replace=False)
        clean[spin] = -rng.uniform(0.0, 2.0 * sigma, size=len(spin))
    clean = np.clip(clean, -3.0 * sigma, spec.rated_power)

    power = clean.copy()
    labels = np.empty(0, dtype=np.int64)
    n_out = int(round(cfg.outlier_rate * n))
    if n_out:
        if cfg.outlier_kind == "scaled":
            candidate = np.minimum(cfg.outlier_factor * power_curve(spec, u), spec.rated_power)
        elif cfg.outlier_kind == "stuck-at":
            candidate = np.zeros(n)
        else:
            candidate = rng.uniform(0.0, spec.rated_power, size=n)
        eligible = np.flatnonzero(np.abs(candidate - clean) >= 5.0 * sigma)
        labels = np.sort(rng.choice(eligible, size=min(n_out, len(eligible)), replace=False))
        power[labels] = candidate[labels]

    ambient = (8.0 + 10.0 * np.sin(2 * np.pi * np.arange(n) / (144 * 365))
               + 4.0 * np.sin(2 * np.pi * np.arange(n) / 144) + rng.normal(0, 0.5, n))
    load = np.clip(clean / spec.rated_power, 0.0, 1.0)
    nacelle = ambient + 6.0 + 14.0 * load + rng.normal(0, 0.5, n)
    oil_temp = 0.5 * (ambient + nacelle) + 15.0 + 8.0 * load + rng.normal(0, 0.7, n)
    oil_press = 160.0 + 25.0 * load - 0.2 * (oil_temp - 30.0) + rng.normal(0, 1.5, n)

    series = ScadaSeries(
        cfg.start + cfg.cadence * np.arange(n),
        {
            "wind_speed": u,
            "wind_direction": direction,
            "power": power / 1000.0,
            "ambient_temp": ambient,
            "nacelle_temp": nacelle,
            "hydraulic_oil_temp": oil_temp,
            "hydraulic_oil_pressure": oil_press,
        },
        cadence=cfg.cadence,
    )
    return series, labels


def write_synthetic(series: ScadaSeries, labels, path, spec=None, cfg=None):
    """Write the ingest CSV plus a ``<stem>.labels.json`` sidecar."""
    path = Path(path)
    write_csv(series, path)
    sidecar = path.with_suffix(".labels.json")
    payload = {"outliers": [int(i) for i in labels]}
    if spec is not None:
        payload["turbine"] = asdict(spec)
    if cfg is not None:
        payload["config"] = asdict(cfg)
    sidecar.write_text(json.dumps(payload, indent=1, sort_keys=True))
    return sidecar
