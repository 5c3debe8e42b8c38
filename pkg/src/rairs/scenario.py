"""Scenario configuration and unit conversions.

All angles are radians and all powers are watts once inside the library;
degrees and dBm appear only in configuration files and CLI output.  Field
names carry their unit as a suffix where one applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

SPEED_OF_LIGHT_M_S = 299_792_458.0

# Element pitch that gives an 8x8 reflecting panel a 12 cm side (seven gaps
# of 12/7 cm), i.e. an aperture diagonal of 12*sqrt(2) cm.
DEFAULT_IRS_SPACING_M = 0.12 / 7.0

HALF_WAVELENGTH = "half_wavelength"


class ConfigError(ValueError):
    """Invalid configuration value; ``field_name`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


def attenuation_amplitude(db: float) -> float:
    """Amplitude factor for a power attenuation given in dB (20 dB -> 0.1)."""
    return 10.0 ** (-db / 20.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical constants, array dimensions and power levels for one experiment.

    The defaults describe the reference operating point: a 28 GHz uplink with
    a 4x4 steerable-antenna array at the origin, an 8x8 reflecting panel at
    [1.5, 2, 2] m, four users on the ground in [-3, 3] x [8, 15] m, 17 dBm
    per-user transmit power, -72 dBm noise and a direct link attenuated by
    20 dB to model blockage.

    ``bs_spacing_m=None`` resolves to half a wavelength.  ``irs_spacing_m``
    accepts a number in meters, ``None`` for the default panel pitch
    (:data:`DEFAULT_IRS_SPACING_M`), or the string ``"half_wavelength"``.
    """

    carrier_hz: float = 28e9
    tx_power_dbm: float = 17.0
    noise_dbm: float = -72.0
    direct_attenuation_db: float = 20.0
    bs_dims: tuple[int, int] = (4, 4)
    irs_dims: tuple[int, int] = (8, 8)
    num_users: int = 4
    theta_max_deg: float = 60.0
    bs_directivity: float = 2.0
    irs_directivity: float = 1.5
    num_direct_scatterers: int = 3
    num_irs_scatterers: int = 2
    bs_center_m: tuple[float, float, float] = (0.0, 0.0, 0.0)
    irs_center_m: tuple[float, float, float] = (1.5, 2.0, 2.0)
    user_region_x_m: tuple[float, float] = (-3.0, 3.0)
    user_region_y_m: tuple[float, float] = (8.0, 15.0)
    user_z_m: float = 0.0
    bs_spacing_m: float | None = None
    irs_spacing_m: float | str | None = None
    seed: int = 0

    # ------------------------------------------------------------------
    # derived quantities
    # ------------------------------------------------------------------
    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT_M_S / self.carrier_hz

    @property
    def bs_pitch_m(self) -> float:
        if self.bs_spacing_m is None:
            return 0.5 * self.wavelength_m
        return float(self.bs_spacing_m)

    @property
    def irs_pitch_m(self) -> float:
        if self.irs_spacing_m is None:
            return DEFAULT_IRS_SPACING_M
        if self.irs_spacing_m == HALF_WAVELENGTH:
            return 0.5 * self.wavelength_m
        return float(self.irs_spacing_m)

    @property
    def num_bs_antennas(self) -> int:
        return self.bs_dims[0] * self.bs_dims[1]

    @property
    def num_irs_elements(self) -> int:
        return self.irs_dims[0] * self.irs_dims[1]

    @property
    def theta_max_rad(self) -> float:
        return math.radians(self.theta_max_deg)

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watt(self.tx_power_dbm)

    @property
    def noise_w(self) -> float:
        return dbm_to_watt(self.noise_dbm)

    @property
    def direct_attenuation_amp(self) -> float:
        return attenuation_amplitude(self.direct_attenuation_db)

    def user_powers_w(self) -> np.ndarray:
        """Per-user transmit powers in watts (equal for all users)."""
        return np.full(self.num_users, self.tx_power_w)

    # ------------------------------------------------------------------
    # validation / serialization
    # ------------------------------------------------------------------
    def validate(self) -> "ScenarioConfig":
        if self.carrier_hz <= 0:
            raise ConfigError("carrier_hz", "must be positive")
        if self.num_users < 1:
            raise ConfigError("num_users", "must be at least 1")
        for name, dims in (("bs_dims", self.bs_dims), ("irs_dims", self.irs_dims)):
            if len(dims) != 2 or any(int(d) != d or d < 1 for d in dims):
                raise ConfigError(name, "must be a pair of positive integers")
        if not 0.0 < self.theta_max_deg <= 90.0:
            raise ConfigError("theta_max_deg", "must lie in (0, 90]")
        if self.bs_directivity < 1.0:
            raise ConfigError("bs_directivity", "must be at least 1")
        if self.irs_directivity < 1.0:
            raise ConfigError("irs_directivity", "must be at least 1")
        if self.num_direct_scatterers < 0:
            raise ConfigError("num_direct_scatterers", "must be non-negative")
        if self.num_irs_scatterers < 0:
            raise ConfigError("num_irs_scatterers", "must be non-negative")
        if self.direct_attenuation_db < 0:
            raise ConfigError("direct_attenuation_db", "must be non-negative")
        if self.user_region_x_m[0] > self.user_region_x_m[1]:
            raise ConfigError("user_region_x_m", "empty range")
        if self.user_region_y_m[0] > self.user_region_y_m[1]:
            raise ConfigError("user_region_y_m", "empty range")
        if self.bs_pitch_m <= 0:
            raise ConfigError("bs_spacing_m", "must be positive")
        if isinstance(self.irs_spacing_m, str) and self.irs_spacing_m != HALF_WAVELENGTH:
            raise ConfigError("irs_spacing_m", f"unknown preset {self.irs_spacing_m!r}")
        if self.irs_pitch_m <= 0:
            raise ConfigError("irs_spacing_m", "must be positive")
        return self

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(key, "unknown scenario field")
            if isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
        try:
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError("scenario", str(exc)) from exc
        return cfg.validate()
