"""Experiment configuration: defaults, validation and the INI-style file codec.

The file format is a plain ``key = value`` text file. Section headers are
allowed for grouping but carry no meaning: all keys live in one flat
namespace. Lists are comma separated, transceiver splits are ``tx:rx`` pairs.
"""

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidConfigError

SPEED_OF_LIGHT = 299_792_458.0

EXPERIMENTS = ("A", "B", "C", "custom")


@dataclass(frozen=True)
class ExperimentConfig:
    # service area and population
    area_m: float = 1000.0
    k_ues: int = 16
    # cell-free network
    m_cf: int = 32
    na_cf: int = 4
    m_tx: int = 24
    m_rx: int = 8
    n_zones: int = 4
    # OFDM numerology
    n_subcarriers: int = 12
    scs_hz: float = 30e3
    cp_s: float = 2.34e-6
    n_symbols: int = 14
    carrier_hz: float = 3e9
    # power, target, noise
    p_per_tap_w: float = 1.0
    ue_pilot_power_w: float = 0.1
    rcs_dbsm: float = 10.0
    noise_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    # propagation
    k_factor_db: float = 10.0
    pathloss_intercept_db: float = -30.5
    pathloss_exponent: float = 3.67
    shadow_sigma_db: float = 4.0
    target_speed_mps: float = 10.0
    ap_height_m: float = 10.0
    ue_height_m: float = 1.65
    target_z_min_m: float = 20.0
    target_z_max_m: float = 100.0
    # Monte-Carlo control
    trials: int = 1000
    seed: int = 0
    experiment: str = "B"
    architectures: tuple = ("CF", "MC")
    # modelling switches
    csi_mode: str = "mmse"
    steering_norm: str = "unit"
    layout: str = "random"
    zone_mode: str = "all"
    serving: str = "all"
    serving_q: int = 4
    symbols: str = "psk"
    # case-study sweeps
    nc_sweep: tuple = tuple(range(1, 13))
    a_splits: tuple = ((30, 2), (24, 8))
    b_splits: tuple = ((31, 1), (24, 8), (1, 31))
    c_total_antennas: int = 0  # 0 -> m_cf * na_cf
    c_cf_antennas: tuple = (1, 4)
    c_mc_bs: tuple = (1, 2, 4)
    c_tx_fraction: float = 0.75

    def __post_init__(self):
        validate(self)

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def bandwidth_hz(self):
        return self.n_subcarriers * self.scs_hz

    @property
    def noise_variance_w(self):
        """Per-sample receiver noise power over the occupied bandwidth, in watts."""
        dbm = self.noise_dbm_hz + self.noise_figure_db + 10 * math.log10(self.bandwidth_hz)
        return dbm_to_watts(dbm)

    @property
    def rcs_variance(self):
        return db_to_linear(self.rcs_dbsm)

    @property
    def k_factor(self):
        return db_to_linear(self.k_factor_db)

    @property
    def total_antennas(self):
        return self.c_total_antennas or self.m_cf * self.na_cf

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


_CHOICES = {
    "experiment": EXPERIMENTS,
    "csi_mode": ("perfect", "mmse"),
    "steering_norm": ("unit", "literal"),
    "layout": ("random", "fixed"),
    "zone_mode": ("all", "zone"),
    "serving": ("all", "nearest"),
    "symbols": ("psk", "qpsk"),
}


def _require(ok, key, message):
    if not ok:
        raise InvalidConfigError(key, message)


def validate(cfg):
    """Raise InvalidConfigError naming the first offending key."""
    for key in ("area_m", "scs_hz", "carrier_hz", "p_per_tap_w", "ue_pilot_power_w"):
        _require(getattr(cfg, key) > 0, key, "must be > 0")
    for key in ("m_cf", "na_cf", "n_subcarriers", "n_symbols", "trials", "n_zones", "serving_q"):
        _require(getattr(cfg, key) >= 1, key, "must be >= 1")
    for key in ("k_ues", "cp_s", "noise_figure_db", "k_factor_db", "shadow_sigma_db",
                "target_speed_mps", "ap_height_m", "ue_height_m", "seed", "c_total_antennas"):
        _require(getattr(cfg, key) >= 0, key, "must be >= 0")
    _require(cfg.m_tx >= 1, "m_tx", "at least one transmitting AP is required")
    _require(cfg.m_rx >= 1, "m_rx", "at least one receiving AP is required")
    _require(cfg.m_tx + cfg.m_rx == cfg.m_cf, "m_tx", f"m_tx + m_rx must equal m_cf={cfg.m_cf}")
    _require(0 < cfg.target_z_min_m <= cfg.target_z_max_m, "target_z_min_m",
             "need 0 < target_z_min_m <= target_z_max_m")
    _require(cfg.pathloss_exponent > 0, "pathloss_exponent", "must be > 0")
    _require(0 < cfg.c_tx_fraction < 1, "c_tx_fraction", "must lie in (0, 1)")
    for key, allowed in _CHOICES.items():
        _require(getattr(cfg, key) in allowed, key, f"must be one of {allowed}")
    _require(len(cfg.architectures) >= 1 and set(cfg.architectures) <= {"CF", "MC"},
             "architectures", "must be a non-empty subset of CF,MC")
    _require(len(cfg.nc_sweep) >= 1 and all(n >= 1 for n in cfg.nc_sweep),
             "nc_sweep", "entries must be >= 1")
    for key in ("a_splits", "b_splits"):
        splits = getattr(cfg, key)
        _require(len(splits) >= 1 and all(t >= 1 and r >= 1 for t, r in splits),
                 key, "every split needs tx >= 1 and rx >= 1")
    for key in ("c_cf_antennas", "c_mc_bs"):
        _require(len(getattr(cfg, key)) >= 1 and all(v >= 1 for v in getattr(cfg, key)),
                 key, "entries must be >= 1")
    # Doppler must stay far below the subcarrier spacing for the detector model to hold
    fd_max = 2 * cfg.target_speed_mps / cfg.wavelength
    _require(fd_max < 0.01 * cfg.scs_hz, "target_speed_mps",
             f"max Doppler {fd_max:.1f} Hz is not << subcarrier spacing")


def check_case_c(cfg):
    """Divisibility preconditions of the antenna-deployment study."""
    total = cfg.total_antennas
    for key in ("c_cf_antennas", "c_mc_bs"):
        for v in getattr(cfg, key):
            _require(total % v == 0, key, f"total antennas {total} not divisible by {v}")


# --- file codec -----------------------------------------------------------

def _fmt_float(v):
    return repr(float(v))


def _parse_splits(text):
    out = []
    for item in _split_list(text):
        tx, sep, rx = item.partition(":")
        if not sep:
            raise ValueError(f"split {item!r} is not of the form tx:rx")
        out.append((int(tx), int(rx)))
    return tuple(out)


def _split_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _codec(f):
    """(parse, format) pair for a dataclass field, chosen from its default."""
    default = f.default
    if f.name in ("a_splits", "b_splits"):
        return _parse_splits, lambda v: ",".join(f"{t}:{r}" for t, r in v)
    if f.name == "architectures":
        return (lambda s: tuple(x.upper() for x in _split_list(s))), ",".join
    if isinstance(default, tuple):
        return (lambda s: tuple(int(x) for x in _split_list(s))), lambda v: ",".join(map(str, v))
    if isinstance(default, bool):
        raise TypeError(f.name)
    if isinstance(default, int):
        return int, str
    if isinstance(default, float):
        return float, _fmt_float
    return str, str


FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def config_from_mapping(values):
    """Build a config from string values; unknown keys and bad types are errors."""
    kwargs = {}
    for key, raw in values.items():
        if key not in FIELDS:
            raise InvalidConfigError(key, "unknown configuration key")
        parse, _ = _codec(FIELDS[key])
        try:
            kwargs[key] = parse(raw.strip())
        except (TypeError, ValueError) as exc:
            raise InvalidConfigError(key, f"cannot parse {raw!r}: {exc}") from None
    return ExperimentConfig(**kwargs)


def parse_config_text(text):
    parser = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
        inline_comment_prefixes=("#",), default_section="\x00unused")
    parser.optionxform = str
    try:
        parser.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise InvalidConfigError("<file>", str(exc)) from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key in values:
                raise InvalidConfigError(key, "key defined more than once")
            values[key] = raw
    return config_from_mapping(values)


def parse_config(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))


def serialize_config(cfg):
    lines = ["[experiment]"]
    for name, f in FIELDS.items():
        _, fmt = _codec(f)
        lines.append(f"{name} = {fmt(getattr(cfg, name))}")
    return "\n".join(lines) + "\n"


def config_dict(cfg):
    """JSON-friendly snapshot of the resolved config."""
    return {name: (list(map(list, v)) if name.endswith("splits") else
                   list(v) if isinstance(v, tuple) else v)
            for name, v in dataclasses.asdict(cfg).items()}
