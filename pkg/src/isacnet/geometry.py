"""Network realizations: AP/BS placement, UE and target drops, role and
association sets, and the CF -> MC fairness mapping.

Positions are float arrays of shape (n, 3) holding (x, y, z) in meters. The
service area is the square [0, area_m] x [0, area_m].
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidConfigError, OutOfBoundsError


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array. ``spacing`` is in wavelengths."""

    num_elements: int
    spacing: float = 0.5
    orientation: str = "y"

    def __post_init__(self):
        if self.num_elements < 1:
            raise InvalidConfigError("num_elements", "array needs at least one element")
        if self.spacing <= 0:
            raise InvalidConfigError("spacing", "element spacing must be > 0")
        if self.orientation not in ("x", "y"):
            raise InvalidConfigError("orientation", "ULA axis must be 'x' or 'y'")


@dataclass(frozen=True)
class TargetState:
    position: np.ndarray
    velocity: np.ndarray
    rcs_variance: float

    def __post_init__(self):
        if not self.rcs_variance > 0:
            raise InvalidConfigError("rcs_dbsm", "RCS variance must be > 0")

    def max_doppler(self, wavelength):
        return 2.0 * float(np.linalg.norm(self.velocity)) / wavelength


@dataclass(frozen=True)
class CfDeployment:
    ap_positions: np.ndarray
    ap_array: ArrayConfig
    tx_set: np.ndarray
    rx_set: np.ndarray
    zones: np.ndarray  # (S, 4) rows of x0, x1, y0, y1
    per_ap_power: float
    serving_sets: tuple = ()  # per UE: tAP indices (global AP numbering)
    sensing_sets: tuple = ()  # per zone: (tAP indices, rAP indices)

    @property
    def num_aps(self):
        return len(self.ap_positions)

    def served_ues(self, ap):
        """UEs served by tAP ``ap`` (the per-tAP set used for power allocation)."""
        return np.array([k for k, s in enumerate(self.serving_sets) if ap in s], dtype=int)


@dataclass(frozen=True)
class FairMcConfig:
    m_mc: int
    n_tx: int
    n_rx: int
    per_bs_power: float


@dataclass(frozen=True)
class McDeployment:
    bs_positions: np.ndarray
    tx_array: ArrayConfig
    rx_array: ArrayConfig
    cell_bounds: np.ndarray  # (M, 4) rows of x0, x1, y0, y1
    grid_shape: tuple  # cells along x, cells along y
    per_bs_power: float
    area_m: float
    ue_assignment: tuple = ()  # per BS: UE indices
    cell_grid_sets: tuple = ()  # per BS: probed inspection-point indices

    @property
    def num_bs(self):
        return len(self.bs_positions)


def _grid_shape(count, key):
    if count == 1:
        return 1, 1
    if count == 2:
        return 2, 1  # two vertical halves split along x
    side = int(round(np.sqrt(count)))
    if side * side == count:
        return side, side
    raise InvalidConfigError(key, f"unsupported cell layout for {count} cells "
                             "(use 1, 2 or a perfect square)")


def _rect_tiles(area, nx, ny):
    """Tiles indexed ix * ny + iy, as (x0, x1, y0, y1) rows."""
    wx, wy = area / nx, area / ny
    return np.array([(ix * wx, (ix + 1) * wx, iy * wy, (iy + 1) * wy)
                     for ix in range(nx) for iy in range(ny)])


def _tile_index(point, area, nx, ny):
    x, y = float(point[0]), float(point[1])
    if not (0.0 <= x <= area and 0.0 <= y <= area):
        raise OutOfBoundsError(f"point ({x}, {y}) outside the {area} m service area")
    # cell i covers (lo, hi]; the first cell also owns lo=0, so shared edges go to the lower index
    ix = max(int(np.ceil(x * nx / area)) - 1, 0)
    iy = max(int(np.ceil(y * ny / area)) - 1, 0)
    return ix * ny + iy


def zone_of(cf, area, point):
    nx, ny = _grid_shape(len(cf.zones), "n_zones")
    return _tile_index(point, area, nx, ny)


def drop_cf_deployment(cfg, rng):
    """Random AP layout with a random tx/rx role split."""
    if cfg.m_tx < 1 or cfg.m_rx < 1 or cfg.m_tx + cfg.m_rx != cfg.m_cf:
        raise InvalidConfigError("m_tx", "tx and rx sets must both be non-empty and partition the APs")
    xy = rng.uniform(0.0, cfg.area_m, size=(cfg.m_cf, 2))
    pos = np.column_stack([xy, np.full(cfg.m_cf, cfg.ap_height_m)])
    tx = np.sort(rng.choice(cfg.m_cf, size=cfg.m_tx, replace=False))
    rx = np.setdiff1d(np.arange(cfg.m_cf), tx)
    nx, ny = _grid_shape(cfg.n_zones, "n_zones")
    zones = _rect_tiles(cfg.area_m, nx, ny)
    sensing = tuple((tx, rx) for _ in range(len(zones)))
    return CfDeployment(pos, ArrayConfig(cfg.na_cf), tx, rx, zones, cfg.p_per_tap_w,
                        sensing_sets=sensing)


def restrict_sensing_to_zones(cf, area):
    """Zone-restricted association: each zone keeps only the APs inside it.

    A zone without a tAP (rAP) borrows the tAP (rAP) nearest to its centre so
    that every zone stays testable.
    """
    nx, ny = _grid_shape(len(cf.zones), "n_zones")
    ap_zone = np.array([_tile_index(p, area, nx, ny) for p in cf.ap_positions])
    sets = []
    for z, (x0, x1, y0, y1) in enumerate(cf.zones):
        centre = np.array([(x0 + x1) / 2, (y0 + y1) / 2])
        pair = []
        for role in (cf.tx_set, cf.rx_set):
            inside = role[ap_zone[role] == z]
            if inside.size == 0:
                d = np.linalg.norm(cf.ap_positions[role, :2] - centre, axis=1)
                inside = role[[int(np.argmin(d))]]
            pair.append(inside)
        sets.append(tuple(pair))
    return replace(cf, sensing_sets=tuple(sets))


def assign_cf_serving(cf, ue_positions, mode="all", q=4):
    """Per-UE serving tAP sets: every tAP, or the q nearest tAPs."""
    if mode == "all" or len(ue_positions) == 0:
        sets = tuple(cf.tx_set for _ in range(len(ue_positions)))
    elif mode == "nearest":
        tx_pos = cf.ap_positions[cf.tx_set]
        q = min(q, len(cf.tx_set))
        sets = []
        for ue in ue_positions:
            d = np.linalg.norm(tx_pos - ue, axis=1)
            sets.append(np.sort(cf.tx_set[np.argsort(d, kind="stable")[:q]]))
        sets = tuple(sets)
    else:
        raise InvalidConfigError("serving", f"unknown serving mode {mode!r}")
    return replace(cf, serving_sets=sets)


def map_cf_to_fair_mc(m_cf, na_cf, m_tx, m_rx, p_cf):
    """Multi-cell configuration matched to a cell-free one.

    One BS per CF antenna index, one BS transmit (receive) element per tAP
    (rAP), and per-BS power chosen so total network power is unchanged.
    """
    if m_tx < 1 or m_rx < 1:
        raise InvalidConfigError("m_tx", "fair MC mapping needs non-empty tx and rx sets")
    m_mc = na_cf
    return FairMcConfig(m_mc=m_mc, n_tx=m_tx, n_rx=m_rx, per_bs_power=m_cf * p_cf / m_mc)


def drop_mc_deployment(area_m, m_mc, n_tx, n_rx, per_bs_power, height=10.0):
    """Deterministic cell-centred BS layout."""
    nx, ny = _grid_shape(m_mc, "m_mc")
    bounds = _rect_tiles(area_m, nx, ny)
    centres = np.column_stack([(bounds[:, 0] + bounds[:, 1]) / 2,
                               (bounds[:, 2] + bounds[:, 3]) / 2,
                               np.full(len(bounds), float(height))])
    return McDeployment(centres, ArrayConfig(n_tx), ArrayConfig(n_rx), bounds, (nx, ny),
                        per_bs_power, float(area_m))


def responsible_bs(mc, p):
    nx, ny = mc.grid_shape
    return _tile_index(p, mc.area_m, nx, ny)


def assign_mc(mc, ue_positions, probe_positions=()):
    """Cell-centric UE and inspection-point ownership."""
    ue_owner = [responsible_bs(mc, u) for u in ue_positions]
    probe_owner = [responsible_bs(mc, p) for p in probe_positions]
    ues = tuple(np.array([k for k, b in enumerate(ue_owner) if b == m], dtype=int)
                for m in range(mc.num_bs))
    cells = tuple(np.array([i for i, b in enumerate(probe_owner) if b == m], dtype=int)
                  for m in range(mc.num_bs))
    return replace(mc, ue_assignment=ues, cell_grid_sets=cells)


def drop_entities(cfg, rng):
    """K UEs at fixed height and one target with a random horizontal heading."""
    k = cfg.k_ues
    ue_xy = rng.uniform(0.0, cfg.area_m, size=(k, 2))
    ues = np.column_stack([ue_xy, np.full(k, cfg.ue_height_m)])
    txy = rng.uniform(0.0, cfg.area_m, size=2)
    tz = rng.uniform(cfg.target_z_min_m, cfg.target_z_max_m)
    heading = rng.uniform(0.0, 2 * np.pi)
    velocity = cfg.target_speed_mps * np.array([np.cos(heading), np.sin(heading), 0.0])
    target = TargetState(np.array([txy[0], txy[1], tz]), velocity, cfg.rcs_variance)
    return ues, target
