"""
Configuration management for the near-field alignment simulator.
----------------------------------------------------------------

Classes:
    - ArrayConfig: Array geometry and radio constants, with derived quantities.
    - SimConfig: Full simulation configuration as read from a flat YAML file.
    - ConfigError: Custom exception for invalid configuration.

Functions:
    - load_config: Load configuration from file and override with command-line options.

"""

import math
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_yaml import parse_yaml_file_as
from rich import print

# Default Configuration
SPEED_OF_LIGHT = 3e8
N_ANTENNAS = 256
CARRIER_GHZ = 28.0
BANDWIDTH_MHZ = 850.0
NOISE_PSD_DBM_PER_HZ = -174.0
R_MIN_M = 4.0
R_MAX_M = 80.0
PHI_MAX_DEG = 60.0
P_T_DBM = [float(p) for p in range(-10, 15, 2)]
ASWJE_MULTI_PREFIX = "aswje_ka"
SCHEMES = ["proposed", "coarse", "ls", "polar_exh", "aswje", "aswje_ka3"]


class ConfigError(Exception):
    """Custom exception for invalid configuration."""

    pass


class ArrayConfig(BaseModel):
    """Uniform linear array at half-wavelength spacing and its radio environment."""

    model_config = ConfigDict(frozen=True)

    n_antennas: int = Field(default=N_ANTENNAS, ge=2)
    carrier_hz: float = Field(default=CARRIER_GHZ * 1e9, gt=0)
    bandwidth_hz: float = Field(default=BANDWIDTH_MHZ * 1e6, gt=0)
    noise_psd_dbm_per_hz: float = NOISE_PSD_DBM_PER_HZ
    r_min: float = Field(default=R_MIN_M, gt=0)
    r_max: float = Field(default=R_MAX_M, gt=0)

    @model_validator(mode="after")
    def _check_range(self) -> "ArrayConfig":
        if self.r_min >= self.r_max:
            raise ValueError(f"r_min ({self.r_min}) must be below r_max ({self.r_max})")
        return self

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def spacing(self) -> float:
        return self.wavelength / 2

    @property
    def aperture(self) -> float:
        return (self.n_antennas - 1) * self.spacing

    @property
    def noise_power_dbm(self) -> float:
        return self.noise_psd_dbm_per_hz + 10 * math.log10(self.bandwidth_hz)

    @property
    def noise_power_mw(self) -> float:
        return 10 ** (self.noise_power_dbm / 10)

    @property
    def fresnel_distance(self) -> float:
        return 0.62 * math.sqrt(self.aperture**3 / self.wavelength)

    @property
    def rayleigh_distance(self) -> float:
        return 2 * self.aperture**2 / self.wavelength

    @property
    def element_offsets(self) -> np.ndarray:
        """Return δₙ = (2n − N − 1)/2 for n = 1..N."""
        n = np.arange(1, self.n_antennas + 1)
        return (2 * n - self.n_antennas - 1) / 2


class SimConfig(BaseModel):
    """Configuration model for a simulation run; keys carry their units."""

    n_antennas: int = Field(default=N_ANTENNAS, ge=2)
    carrier_ghz: float = Field(default=CARRIER_GHZ, gt=0)
    bandwidth_mhz: float = Field(default=BANDWIDTH_MHZ, gt=0)
    noise_psd_dbm_per_hz: float = NOISE_PSD_DBM_PER_HZ
    r_min_m: float = Field(default=R_MIN_M, gt=0)
    r_max_m: float = Field(default=R_MAX_M, gt=0)
    phi_max_deg: float = Field(default=PHI_MAX_DEG, gt=0, le=90)

    p_t_dbm: list[float] = Field(default_factory=lambda: list(P_T_DBM))
    trials: int = Field(default=2000, ge=1)
    seed: int = Field(default=0, ge=0)
    schemes: list[str] = Field(default_factory=lambda: list(SCHEMES))

    epsilon: float = Field(default=0.1, gt=0, lt=1)
    gamma_exponent: float = 1.5
    n_rf: int = Field(default=1, ge=1)
    t_symbol_us: float = Field(default=1.04, gt=0)
    t_total_ms: float = Field(default=10.0, gt=0)

    polar_beta: float = Field(default=1.2, gt=0)
    polar_rings: int = Field(default=16, ge=1)
    aswje_kappa2: float = Field(default=0.5, gt=0, lt=1)
    aswje_ka: int = Field(default=3, ge=2)
    aswje_step: float = Field(default=0.1, gt=0)
    dnbt_chi: int = Field(default=16, ge=1)
    dnn_kb: int = Field(default=20, ge=0)

    train_samples: int = Field(default=20000, ge=2)
    train_lr: float = Field(default=1e-3, ge=0)
    train_epochs: int = Field(default=100, ge=1)
    train_patience: int = Field(default=10, ge=1)
    train_batch: int = Field(default=64, ge=1)
    train_val_fraction: float = Field(default=0.1, gt=0, lt=1)

    weights_path: Optional[Path] = None
    csv_path: Optional[Path] = None
    plot_dir: Optional[Path] = None

    @model_validator(mode="after")
    def _check_ranges(self) -> "SimConfig":
        if self.r_min_m >= self.r_max_m:
            raise ValueError(f"r_min_m ({self.r_min_m}) must be below r_max_m ({self.r_max_m})")
        if "schemes" not in self.model_fields_set:
            self.schemes = [self.aswje_multi_scheme if s.startswith(ASWJE_MULTI_PREFIX) else s for s in self.schemes]
        stale = [s for s in self.schemes if s.startswith(ASWJE_MULTI_PREFIX) and s != self.aswje_multi_scheme]
        if stale:
            raise ValueError(f"Scheme {stale[0]} does not match aswje_ka = {self.aswje_ka}; use {self.aswje_multi_scheme}")
        return self

    @property
    def aswje_multi_scheme(self) -> str:
        """Name of the multi-candidate ASW-JE scheme, e.g. aswje_ka3."""
        return f"{ASWJE_MULTI_PREFIX}{self.aswje_ka}"

    @property
    def array(self) -> ArrayConfig:
        """Array geometry in SI units."""
        return ArrayConfig(
            n_antennas=self.n_antennas,
            carrier_hz=self.carrier_ghz * 1e9,
            bandwidth_hz=self.bandwidth_mhz * 1e6,
            noise_psd_dbm_per_hz=self.noise_psd_dbm_per_hz,
            r_min=self.r_min_m,
            r_max=self.r_max_m,
        )

    @property
    def phi_max(self) -> float:
        return math.radians(self.phi_max_deg)

    @staticmethod
    def load(filename: Union[str, Path]) -> Optional["SimConfig"]:
        """Load configuration from a YAML file.

        Args:
            filename (Union[str, Path]): Path to the configuration file.

        Returns:
            Optional[SimConfig]: Loaded configuration object or None if config file not found.

        Raises:
            ConfigError: If the file cannot be parsed or fails validation.
        """
        if not Path(filename).exists():
            print(f":warning: [yellow]Config file {filename} not found. Using defaults.[/yellow]")
            return None
        try:
            return parse_yaml_file_as(SimConfig, filename)
        except ValidationError as exc:
            raise ConfigError(f"Invalid configuration in {filename}: {exc}") from exc
        except Exception as exc:
            raise ConfigError(f"Could not read {filename}: {exc}") from exc


def load_config(
    config_file: Path,
    trials: Optional[int] = None,
    seed: Optional[int] = None,
    schemes: Optional[list[str]] = None,
) -> SimConfig:
    """Load configuration from file and override with command-line options.

    Args:
        config_file (Path): Path to the configuration file.
        trials (Optional[int]): Command-line trial count.
        seed (Optional[int]): Command-line master seed.
        schemes (Optional[list[str]]): Command-line scheme list.

    Returns:
        SimConfig: Loaded configuration object.

    Raises:
        ConfigError: If the file or the overrides are invalid.
    """
    config = SimConfig.load(config_file.expanduser()) or SimConfig()

    overrides: dict[str, object] = {}
    if trials is not None:
        overrides["trials"] = trials
    if seed is not None:
        overrides["seed"] = seed
    if schemes:
        overrides["schemes"] = schemes

    if overrides:
        try:
            config = SimConfig.model_validate({**config.model_dump(), **overrides})
        except ValidationError as exc:
            raise ConfigError(f"Invalid command-line override: {exc}") from exc

    if not config.p_t_dbm and config.csv_path is None:
        print(":warning: [yellow]Empty power sweep; outputs will be header-only.[/yellow]")

    return config
