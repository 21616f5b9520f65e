"""Over-water two-ray channel model and link budget.

The sea surface is treated as an ideal reflector (coefficient -1). A
log-distance model is available as a configurable fallback.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN_DBM_HZ = -174.0

# Receiver noise floor per 6 MHz channel, configurable per scenario.
DEFAULT_NOISE_FLOOR_DBM = -103.0

# Regulatory EIRP ceiling commonly attached to grants for mobile devices.
MOBILE_EIRP_CAP_DBM = 36.0


class NonPositiveInput(ValueError):
    pass


def _require_positive(**values):
    for name, value in values.items():
        if not np.all(np.asarray(value) > 0):
            raise NonPositiveInput(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class LinkGeometry:
    h_t: float
    h_r: float
    distance_m: float
    center_freq_hz: float

    def __post_init__(self):
        _require_positive(h_t=self.h_t, h_r=self.h_r, distance_m=self.distance_m,
                          center_freq_hz=self.center_freq_hz)

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.center_freq_hz


@dataclass(frozen=True)
class LinkBudgetParams:
    p_t_dbm: float
    g_t_dbi: float = 0.0
    g_r_dbi: float = 0.0
    fade_margin_db: float = 0.0

    def __post_init__(self):
        if self.fade_margin_db < 0:
            raise ValueError("fade margin must be non-negative")


def breakpoint_distance_m(h_t, h_r, center_freq_hz):
    """Distance beyond which the two-ray loss falls off at 40 dB/decade: 4 h_t h_r / lambda."""
    _require_positive(h_t=h_t, h_r=h_r, center_freq_hz=center_freq_hz)
    wavelength = SPEED_OF_LIGHT / np.asarray(center_freq_hz, dtype=float)
    out = 4.0 * np.asarray(h_t, dtype=float) * np.asarray(h_r, dtype=float) / wavelength
    return float(out) if np.ndim(out) == 0 else out


def two_ray_path_loss_db(geom: LinkGeometry) -> float:
    """Exact flat-earth two-ray loss: direct ray plus a phase-inverted unit reflection."""
    lam = geom.wavelength_m
    k = 2.0 * np.pi / lam
    d = geom.distance_m
    r_direct = np.hypot(d, geom.h_t - geom.h_r)
    r_reflect = np.hypot(d, geom.h_t + geom.h_r)
    field = (np.exp(-1j * k * r_direct) / r_direct
             - np.exp(-1j * k * r_reflect) / r_reflect)
    gain = (lam / (4.0 * np.pi)) * np.abs(field)
    return float(-20.0 * np.log10(gain))


def two_ray_far_field_db(geom: LinkGeometry) -> float:
    """Large-distance limit of the two-ray loss, 20 log10(d^2 / (h_t h_r))."""
    return float(20.0 * np.log10(geom.distance_m ** 2 / (geom.h_t * geom.h_r)))


def free_space_path_loss_db(distance_m: float, center_freq_hz: float) -> float:
    _require_positive(distance_m=distance_m, center_freq_hz=center_freq_hz)
    lam = SPEED_OF_LIGHT / center_freq_hz
    return float(20.0 * np.log10(4.0 * np.pi * distance_m / lam))


def log_distance_path_loss_db(geom: LinkGeometry, exponent: float = 3.5,
                              reference_m: float = 1.0) -> float:
    """Free-space loss to ``reference_m`` then ``10 n log10(d / d0)``."""
    _require_positive(exponent=exponent, reference_m=reference_m)
    base = free_space_path_loss_db(reference_m, geom.center_freq_hz)
    return base + 10.0 * exponent * float(np.log10(geom.distance_m / reference_m))


def path_loss_db(geom: LinkGeometry, model: str = "two_ray", exponent: float = 3.5) -> float:
    if model == "two_ray":
        return two_ray_path_loss_db(geom)
    if model == "log_distance":
        return log_distance_path_loss_db(geom, exponent)
    raise ValueError(f"unknown propagation model {model!r}")


def received_power_dbm(params: LinkBudgetParams, geom: LinkGeometry, loss_fn=None) -> float:
    """P_r = P_t + G_t + G_r - L(d) - M_f.

    ``loss_fn`` overrides the two-ray loss (used to inject fixed losses).
    """
    loss = (loss_fn or two_ray_path_loss_db)(geom)
    return params.p_t_dbm + params.g_t_dbi + params.g_r_dbi - loss - params.fade_margin_db


def thermal_noise_dbm(bandwidth_hz: float, noise_figure_db: float = 0.0) -> float:
    _require_positive(bandwidth_hz=bandwidth_hz)
    return BOLTZMANN_DBM_HZ + 10.0 * float(np.log10(bandwidth_hz)) + noise_figure_db


def snr_db(received_dbm: float, noise_floor_dbm: float = DEFAULT_NOISE_FLOOR_DBM) -> float:
    return received_dbm - noise_floor_dbm
