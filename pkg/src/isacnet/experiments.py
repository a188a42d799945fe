"""Monte-Carlo trials and the three case studies (frequency diversity,
transceiver allocation, antenna deployment).

Seeding: trial ``t`` of sweep point ``s`` derives everything from
``SeedSequence([seed, s, t])``, spawned into four independent children for the
AP layout, the UE/target drop, the cell-free fading/symbols and the
multi-cell fading/symbols. Any subset of trials is therefore reproducible on
its own, and the two architectures always see the same UE/target drop.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .channels import estimate_ue_channel, ue_channels
from .config import check_case_c
from .detector import (build_response_cf, build_response_mc, sensing_snr_cf,
                       sensing_snr_mc)
from .errors import InvalidConfigError, IsacError, TrialError
from .transmit import (OfdmNumerology, PrecoderSet, allocate_power_uniform,
                       build_comm_precoder, build_sense_precoder, synthesize_grid)

FIXED_LAYOUT_TAG = 2**32 - 1


@dataclass(frozen=True)
class SnrSample:
    trial: int
    arch: str
    sweep_id: str
    gamma_linear: float

    @property
    def gamma_db(self):
        return 10.0 * math.log10(self.gamma_linear) if self.gamma_linear > 0 else -math.inf


@dataclass(frozen=True)
class TrialStreams:
    layout: np.random.SeedSequence
    entities: np.random.SeedSequence
    cf: np.random.SeedSequence
    mc: np.random.SeedSequence


def trial_streams(cfg, trial_index, sweep_index=0):
    root = np.random.SeedSequence([cfg.seed, sweep_index, trial_index])
    layout, entities, cf, mc = root.spawn(4)
    if cfg.layout == "fixed":
        layout = np.random.SeedSequence([cfg.seed, FIXED_LAYOUT_TAG])
    return TrialStreams(layout, entities, cf, mc)


def _rng(seq):
    return np.random.Generator(np.random.PCG64(seq))


def trial_drops(cfg, trial_index, sweep_index=0):
    """Replay the CF layout and the UE/target drop of one trial."""
    streams = trial_streams(cfg, trial_index, sweep_index)
    cf = geo.drop_cf_deployment(cfg, _rng(streams.layout))
    ues, target = geo.drop_entities(cfg, _rng(streams.entities))
    return cf, ues, target


def _node_precoders(cfg, node_pos, arr, ues, served_mask, budget, target_pos, rng, noise_var):
    """PrecoderSets of a group of nodes sharing one array config.

    ``served_mask`` is (K, M): which UEs each node serves. Every node probes
    exactly the one cell under test.
    """
    n_c = cfg.n_subcarriers
    h, beta = ue_channels(node_pos, arr, ues, n_c, cfg, rng)
    est = estimate_ue_channel(h, beta[:, :, None], cfg.ue_pilot_power_w, max(cfg.k_ues, 1),
                              noise_var, len(ues), rng, perfect=cfg.csi_mode == "perfect")
    w = build_comm_precoder(est.estimate, est.expected_norm_sq) if len(ues) else h
    literal = cfg.steering_norm == "literal"
    sets = []
    for m, pos in enumerate(node_pos):
        served = np.flatnonzero(served_mask[:, m])
        mu, eta = allocate_power_uniform(budget, len(served), 1)
        w0 = build_sense_precoder(arr, target_pos, pos, literal=literal)
        sets.append(PrecoderSet(w[served, m], w0[None, :], mu, eta))
    return sets


def simulate_cf(cfg, streams, ues, target, sweep_id="", trial_index=0):
    """Cell-free sensing SNR for one drop."""
    cf = geo.drop_cf_deployment(cfg, _rng(streams.layout))
    cf = geo.assign_cf_serving(cf, ues, cfg.serving, cfg.serving_q)
    if cfg.zone_mode == "zone":
        cf = geo.restrict_sensing_to_zones(cf, cfg.area_m)
    zone = geo.zone_of(cf, cfg.area_m, target.position)
    tx, rx = cf.sensing_sets[zone]
    rng = _rng(streams.cf)
    numerology = OfdmNumerology.from_config(cfg)
    noise = cfg.noise_variance_w
    mask = np.array([[m in s for m in tx] for s in cf.serving_sets], dtype=bool).reshape(len(ues), len(tx))
    pre = _node_precoders(cfg, cf.ap_positions[tx], cf.ap_array, ues, mask, cf.per_ap_power,
                          target.position, rng, noise)
    grid = synthesize_grid(pre, numerology, rng, cfg.symbols)
    resp = build_response_cf(cf.ap_positions[tx], cf.ap_array, cf.ap_positions[rx], cf.ap_array,
                             target, grid.signals, numerology, cfg.wavelength)
    return SnrSample(trial_index, "CF", sweep_id, sensing_snr_cf(resp, cfg.rcs_variance, noise))


def simulate_mc(cfg, streams, ues, target, mc_config=None, sweep_id="", trial_index=0, arch="MC"):
    """Multi-cell sensing SNR measured by the BS owning the target's cell."""
    if mc_config is None:
        mc_config = geo.map_cf_to_fair_mc(cfg.m_cf, cfg.na_cf, cfg.m_tx, cfg.m_rx, cfg.p_per_tap_w)
    mc = geo.drop_mc_deployment(cfg.area_m, mc_config.m_mc, mc_config.n_tx, mc_config.n_rx,
                                mc_config.per_bs_power, cfg.ap_height_m)
    mc = geo.assign_mc(mc, ues, [target.position])
    b = geo.responsible_bs(mc, target.position)
    served = mc.ue_assignment[b]
    rng = _rng(streams.mc)
    numerology = OfdmNumerology.from_config(cfg)
    noise = cfg.noise_variance_w
    bs_pos = mc.bs_positions[b][None]
    mask = np.ones((len(served), 1), dtype=bool)
    pre = _node_precoders(cfg, bs_pos, mc.tx_array, ues[served], mask, mc.per_bs_power,
                          target.position, rng, noise)
    grid = synthesize_grid(pre, numerology, rng, cfg.symbols)
    resp = build_response_mc(bs_pos[0], mc.tx_array, mc.rx_array, target, grid.signals[0],
                             numerology, cfg.wavelength)
    gamma = sensing_snr_mc(resp.mc_vector, cfg.rcs_variance, noise)
    return SnrSample(trial_index, arch, sweep_id, gamma)


@dataclass(frozen=True)
class TrialResult:
    cf: SnrSample = None
    mc: SnrSample = None


def run_trial(cfg, trial_index, sweep_index=0, sweep_id="custom", mc_config=None):
    """One paired realization: the same drop evaluated by both architectures."""
    try:
        streams = trial_streams(cfg, trial_index, sweep_index)
        ues, target = geo.drop_entities(cfg, _rng(streams.entities))
        cf = mc = None
        if "CF" in cfg.architectures:
            cf = simulate_cf(cfg, streams, ues, target, sweep_id, trial_index)
        if "MC" in cfg.architectures:
            mc = simulate_mc(cfg, streams, ues, target, mc_config, sweep_id, trial_index)
        return TrialResult(cf, mc)
    except IsacError as exc:
        if isinstance(exc, TrialError):
            raise
        raise TrialError(trial_index, sweep_id, exc) from exc


# --- empirical distributions ---------------------------------------------

@dataclass(frozen=True)
class EmpiricalCdf:
    values: np.ndarray  # sorted dB values
    arch: str = ""
    sweep_id: str = ""

    @property
    def count(self):
        return len(self.values)

    @property
    def probabilities(self):
        return np.arange(1, self.count + 1) / self.count


def build_cdf(samples_db, arch="", sweep_id=""):
    values = np.sort(np.asarray(samples_db, dtype=float))
    if values.size == 0:
        raise ValueError("cannot build a CDF from zero samples")
    return EmpiricalCdf(values, arch, sweep_id)


def percentile(cdf, q):
    """Linear interpolation between closest ranks."""
    return float(np.percentile(cdf.values, q))


def value_at(cdf, prob):
    """Smallest sample x with F(x) >= prob."""
    idx = int(np.ceil(prob * cdf.count - 1e-12)) - 1
    return float(cdf.values[min(max(idx, 0), cdf.count - 1)])


def exceed_fraction(a, b):
    """Fraction of paired trials with a strictly greater than b."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise ValueError("exceed_fraction needs two non-empty paired sequences")
    return float(np.mean(a > b))


# --- studies ---------------------------------------------------------------

@dataclass(frozen=True)
class _Unit:
    """One trial of one sweep point, possibly evaluating several variants."""

    cfg: object
    trial: int
    sweep_index: int
    sweep_id: str
    cf_variants: tuple = ()  # (arch label, config)
    mc_variants: tuple = ()  # (arch label, FairMcConfig or None)


def _run_unit(unit):
    cfg = unit.cfg
    try:
        streams = trial_streams(cfg, unit.trial, unit.sweep_index)
        ues, target = geo.drop_entities(cfg, _rng(streams.entities))
        out = []
        for label, ccfg in unit.cf_variants:
            s = simulate_cf(ccfg, streams, ues, target, unit.sweep_id, unit.trial)
            out.append(SnrSample(unit.trial, label, unit.sweep_id, s.gamma_linear))
        for label, mcc in unit.mc_variants:
            out.append(simulate_mc(cfg, streams, ues, target, mcc, unit.sweep_id, unit.trial, label))
        return out
    except IsacError as exc:
        raise TrialError(unit.trial, unit.sweep_id, exc) from exc


@dataclass
class StudyResult:
    experiment: str
    samples: list = field(default_factory=list)
    curve_keys: list = field(default_factory=list)  # (arch, sweep_id) in emission order
    pairs: list = field(default_factory=list)  # (sweep_id, arch_a, arch_b)

    def gammas(self, arch, sweep_id, db=True):
        vals = [s for s in self.samples if s.arch == arch and s.sweep_id == sweep_id]
        vals.sort(key=lambda s: s.trial)
        return np.array([s.gamma_db if db else s.gamma_linear for s in vals])

    def cdf(self, arch, sweep_id):
        return build_cdf(self.gammas(arch, sweep_id), arch, sweep_id)

    def cdfs(self):
        return [self.cdf(a, s) for a, s in self.curve_keys]

    def paired_fraction(self, sweep_id, arch_a, arch_b):
        return exceed_fraction(self.gammas(arch_a, sweep_id), self.gammas(arch_b, sweep_id))


def _execute(units, workers):
    if workers <= 1:
        results = [_run_unit(u) for u in units]
    else:
        chunk = max(1, len(units) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_unit, units, chunksize=chunk))
    return [s for batch in results for s in batch]


def _point_units(cfg, sweep_index, sweep_id, trials):
    cf = (("CF", cfg),) if "CF" in cfg.architectures else ()
    mc = (("MC", None),) if "MC" in cfg.architectures else ()
    return [_Unit(cfg, t, sweep_index, sweep_id, cf, mc) for t in range(trials)]


def _split_config(cfg, tx, rx, **extra):
    return cfg.replace(m_cf=tx + rx, m_tx=tx, m_rx=rx, **extra)


def _paired_study(name, points, trials, workers):
    """points: list of (sweep_id, config)."""
    result = StudyResult(name)
    units = []
    for idx, (sid, pcfg) in enumerate(points):
        units += _point_units(pcfg, idx, sid, trials)
        for arch in ("CF", "MC"):
            if arch in pcfg.architectures:
                result.curve_keys.append((arch, sid))
        if {"CF", "MC"} <= set(pcfg.architectures):
            result.pairs.append((sid, "CF", "MC"))
    result.samples = _execute(units, workers)
    return result


def run_case_study_a(cfg, trials=None, workers=1):
    """Subcarrier-count sweep for every configured transceiver split."""
    trials = trials or cfg.trials
    points = [(f"A_tx{tx}_rx{rx}_nc{nc}", _split_config(cfg, tx, rx, n_subcarriers=nc))
              for tx, rx in cfg.a_splits for nc in cfg.nc_sweep]
    return _paired_study("A", points, trials, workers)


def run_case_study_b(cfg, trials=None, workers=1):
    """Transceiver-split sweep at fixed AP count."""
    trials = trials or cfg.trials
    points = [(f"B_tx{tx}_rx{rx}", _split_config(cfg, tx, rx)) for tx, rx in cfg.b_splits]
    return _paired_study("B", points, trials, workers)


def tx_rx_split(n, fraction):
    """Round n * fraction to the nearest integer for tx; the remainder goes to rx."""
    tx = int(math.floor(n * fraction + 0.5))
    return tx, n - tx


def case_c_variants(cfg):
    """CF configs and MC layouts sharing one antenna total and one power total."""
    check_case_c(cfg)
    total = cfg.total_antennas
    p_total = cfg.m_cf * cfg.p_per_tap_w
    cf_variants = []
    for na in cfg.c_cf_antennas:
        m_cf = total // na
        tx, rx = tx_rx_split(m_cf, cfg.c_tx_fraction)
        if tx < 1 or rx < 1:
            raise InvalidConfigError("c_cf_antennas", f"{m_cf} APs cannot be split into tx and rx")
        cf_variants.append((f"CF-na{na}", cfg.replace(m_cf=m_cf, na_cf=na, m_tx=tx, m_rx=rx,
                                                      p_per_tap_w=p_total / m_cf)))
    mc_variants = []
    for m in cfg.c_mc_bs:
        tx, rx = tx_rx_split(total // m, cfg.c_tx_fraction)
        if tx < 1 or rx < 1:
            raise InvalidConfigError("c_mc_bs", f"{total // m} BS antennas cannot be split")
        mc_variants.append((f"MC-m{m}", geo.FairMcConfig(m, tx, rx, p_total / m)))
    return tuple(cf_variants), tuple(mc_variants)


def run_case_study_c(cfg, trials=None, workers=1):
    """Fixed antenna total spread over CF APs or concentrated into MC BSs.

    Every variant of a trial sees the same UE/target drop.
    """
    trials = trials or cfg.trials
    cf_v, mc_v = case_c_variants(cfg)
    sid = f"C_ntot{cfg.total_antennas}"
    result = StudyResult("C")
    result.curve_keys = [(label, sid) for label, _ in cf_v + mc_v]
    result.pairs = [(sid, a, b) for a, _ in cf_v for b, _ in mc_v]
    units = [_Unit(cfg, t, 0, sid, cf_v, mc_v) for t in range(trials)]
    result.samples = _execute(units, workers)
    return result


def run_custom(cfg, trials=None, workers=1):
    return _paired_study("custom", [("custom", cfg)], trials or cfg.trials, workers)


STUDIES = {"A": run_case_study_a, "B": run_case_study_b, "C": run_case_study_c,
           "custom": run_custom}
