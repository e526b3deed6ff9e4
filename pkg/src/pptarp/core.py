"""Configuration, contention-space geometry and the hopping-pattern placeholder."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

# Largest repetition exponent the NPRACH format allows (M = 2^q, q = 0..7).
MAX_REPETITION_EXPONENT = 7


class ConfigError(ValueError):
    """Raised for structurally invalid protocol configurations."""


def is_power_of_two(n: int) -> bool:
    return isinstance(n, int) and n >= 1 and (n & (n - 1)) == 0


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class SystemConfig:
    """Protocol and channel parameters of one NPRACH contention round.

    Powers are normalized so the per-symbol noise variance is one; ``snr_db``
    is the per-symbol received SNR and ``threshold_db`` is measured relative
    to the mean of the noise-only detection statistic.  Construction
    validates the configuration, so every instance is usable as-is.
    """

    xi: int = 5
    nu: int = 4
    n_preambles: int = 12
    m_base: int = 64
    m_partial: int = 64
    snr_db: float = -5.0
    n_devices: int = 1
    threshold_db: float | None = None
    seed: int = 0

    snr_linear: float = field(init=False, repr=False, compare=False)
    threshold_linear: float | None = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check(self)
        object.__setattr__(self, "snr_linear", db_to_linear(self.snr_db))
        object.__setattr__(
            self,
            "threshold_linear",
            None if self.threshold_db is None else db_to_linear(self.threshold_db),
        )

    @property
    def n_partial_units(self) -> int:
        """Number of partial units G = M_b / M_p."""
        return self.m_base // self.m_partial

    @property
    def n_resources(self) -> int:
        """Size of the contention space, N_P * G."""
        return self.n_preambles * self.n_partial_units

    @property
    def block_symbols(self) -> int:
        """Symbols per basic unit (nu * xi); the coherent accumulation length."""
        return self.nu * self.xi

    @property
    def base_length(self) -> int:
        """Baseline preamble length in symbol groups, L_b = nu * M_b."""
        return self.nu * self.m_base

    @property
    def partial_length(self) -> int:
        """Partial preamble length in symbol groups, L_p = nu * M_p."""
        return self.nu * self.m_partial

    def replace(self, **changes) -> SystemConfig:
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.init}


def _check(cfg: SystemConfig) -> None:
    for name in ("xi", "nu", "n_preambles", "m_base", "m_partial", "n_devices", "seed"):
        value = getattr(cfg, name)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
    for name in ("xi", "nu", "n_preambles", "m_base"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be >= 1, got {getattr(cfg, name)}")
    if cfg.n_devices < 0:
        raise ConfigError(f"n_devices must be >= 0, got {cfg.n_devices}")
    if not is_power_of_two(cfg.m_base):
        raise ConfigError(f"m_base must be a power of two (M = 2^q), got {cfg.m_base}")
    if not is_power_of_two(cfg.m_partial):
        raise ConfigError(f"m_partial must be a power of two (M = 2^q), got {cfg.m_partial}")
    if cfg.m_partial > cfg.m_base:
        raise ConfigError(
            f"m_partial ({cfg.m_partial}) must divide m_base ({cfg.m_base})"
        )
    if cfg.m_partial.bit_length() - 1 > MAX_REPETITION_EXPONENT:
        raise ConfigError(
            f"m_partial must be 2^q with q <= {MAX_REPETITION_EXPONENT}, got {cfg.m_partial}"
        )


def validate(config: SystemConfig) -> SystemConfig:
    """Re-check ``config`` and return it with derived quantities populated.

    Raises
    ------
    ConfigError
        If the configuration violates the preamble-structure constraints.
    """
    if not isinstance(config, SystemConfig):
        raise ConfigError(f"expected SystemConfig, got {type(config).__name__}")
    _check(config)
    return config


class ContentionResource(NamedTuple):
    """A (preamble, partial unit) pair; the unit of contention."""

    preamble_index: int
    partial_unit_index: int

    def flat_index(self, n_partial_units: int) -> int:
        return self.preamble_index * n_partial_units + self.partial_unit_index

    @classmethod
    def from_flat(cls, index: int, n_partial_units: int) -> ContentionResource:
        p, u = divmod(int(index), n_partial_units)
        return cls(p, u)


def contention_space(config: SystemConfig) -> list[ContentionResource]:
    g = config.n_partial_units
    return [ContentionResource(p, u) for p in range(config.n_preambles) for u in range(g)]


HoppingPattern = Callable[[int, int, int], list]


def hopping_pattern(preamble_index: int, length: int, n_subcarriers: int) -> list[int]:
    """Sub-carrier index of each symbol group of a preamble.

    Position ``l`` uses sub-carrier ``(preamble_index + l) % n_subcarriers``,
    so at every position distinct preambles occupy distinct sub-carriers.
    This stands in for the standardized hopping rule; detection metrics
    under orthogonal preambles do not depend on which injective map is used.
    """
    if n_subcarriers < 1:
        raise ValueError(f"n_subcarriers must be >= 1, got {n_subcarriers}")
    if not 0 <= preamble_index < n_subcarriers:
        raise ValueError(
            f"preamble_index {preamble_index} out of range for {n_subcarriers} sub-carriers"
        )
    if length < 0:
        raise ValueError(f"length must be >= 0, got {length}")
    return [(preamble_index + l) % n_subcarriers for l in range(length)]


_CONFIG_TYPES = {
    "xi": int,
    "nu": int,
    "n_preambles": int,
    "m_base": int,
    "m_partial": int,
    "snr_db": float,
    "n_devices": int,
    "threshold_db": float,
    "seed": int,
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into typed SystemConfig keyword arguments."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key == "threshold_db" and value.lower() in ("", "none"):
            values[key] = None
            continue
        try:
            values[key] = _CONFIG_TYPES[key](value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
    return values


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())
