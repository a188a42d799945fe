"""Array responses, large-scale gains and per-resource-element channel draws.

Angle convention: azimuth is measured in the horizontal plane from the global
x-axis, elevation from the horizontal plane. ULAs lie along the y-axis by
default, so element n sees a phase of 2*pi*spacing*n*cos(el)*sin(az).
"""

from dataclasses import dataclass

import numpy as np

from .config import SPEED_OF_LIGHT
from .errors import DegenerateGeometryError, PilotContaminationError


def steering_vector(arr, azimuth, elevation):
    """ULA response; broadcasts over angle arrays, elements on the last axis."""
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    if arr.orientation == "y":
        direction = np.cos(elevation) * np.sin(azimuth)
    else:
        direction = np.cos(elevation) * np.cos(azimuth)
    n = np.arange(arr.num_elements)
    return np.exp(2j * np.pi * arr.spacing * direction[..., None] * n)


def angles_between(frm, to):
    """(azimuth, elevation) of ``to`` as seen from ``frm``."""
    d = np.asarray(to, dtype=float) - np.asarray(frm, dtype=float)
    horiz = np.hypot(d[..., 0], d[..., 1])
    if np.any((horiz == 0) & (d[..., 2] == 0)):
        raise DegenerateGeometryError("coincident points have no direction")
    return np.arctan2(d[..., 1], d[..., 0]), np.arctan2(d[..., 2], horiz)


def _distance(a, b):
    d = np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), axis=-1)
    if np.any(d == 0):
        raise DegenerateGeometryError("zero distance between positions")
    return d


def target_lsf_bistatic(tx, p, rx, wavelength):
    """Radar-equation geometry factor lambda^2 / ((4 pi)^3 d_tx^2 d_rx^2).

    RCS is excluded; it is carried by the reflectivity draw.
    """
    d_tx = _distance(tx, p)
    d_rx = _distance(rx, p)
    return wavelength**2 / ((4 * np.pi) ** 3 * d_tx**2 * d_rx**2)


def bistatic_delay_doppler(tx, p, rx, velocity, wavelength):
    """Path delay tx -> p -> rx and the bistatic Doppler shift.

    Doppler is positive when the target closes on the nodes.
    """
    tx, p, rx = (np.asarray(v, dtype=float) for v in (tx, p, rx))
    d_tx = _distance(tx, p)
    d_rx = _distance(rx, p)
    u_tx = (tx - p) / d_tx[..., None]
    u_rx = (rx - p) / d_rx[..., None]
    v = np.asarray(velocity, dtype=float)
    delay = (d_tx + d_rx) / SPEED_OF_LIGHT
    doppler = ((u_tx @ v) + (u_rx @ v)) / wavelength
    return delay, doppler


@dataclass(frozen=True)
class TargetLink:
    lsf_gain: float
    delay: float
    doppler_hz: float
    rcs_draw: complex
    aoa: tuple  # (azimuth, elevation) at the receiver
    aod: tuple  # (azimuth, elevation) at the transmitter


def make_target_link(tx_pos, target, rx_pos, wavelength, rcs_draw=1.0):
    beta = float(target_lsf_bistatic(tx_pos, target.position, rx_pos, wavelength))
    tau, fd = bistatic_delay_doppler(tx_pos, target.position, rx_pos, target.velocity, wavelength)
    aod = tuple(float(a) for a in angles_between(tx_pos, target.position))
    aoa = tuple(float(a) for a in angles_between(rx_pos, target.position))
    return TargetLink(beta, float(tau), float(fd), complex(rcs_draw), aoa, aod)


def delay_phase(delay, n, scs):
    """rho(n) = exp(-j 2 pi n df tau)."""
    return np.exp(-2j * np.pi * np.asarray(n) * scs * delay)


def doppler_phase(doppler, n_sym, symbol_duration):
    """xi(n') = exp(j 2 pi n' f_d T_s)."""
    return np.exp(2j * np.pi * np.asarray(n_sym) * doppler * symbol_duration)


def _check_re(n, n_sym, numerology):
    if not (0 <= n < numerology.n_subcarriers and 0 <= n_sym < numerology.n_symbols):
        raise IndexError(f"resource element ({n}, {n_sym}) outside the "
                         f"{numerology.n_subcarriers}x{numerology.n_symbols} grid")


def target_channel_cf(link, tx_arr, rx_arr, n, n_sym, numerology):
    """Bistatic LoS target channel matrix (N_rx x N_tx) at one resource element."""
    _check_re(n, n_sym, numerology)
    a_rx = steering_vector(rx_arr, *link.aoa)
    a_tx = steering_vector(tx_arr, *link.aod)
    phase = (delay_phase(link.delay, n, numerology.scs)
             * doppler_phase(link.doppler_hz, n_sym, numerology.symbol_duration))
    return link.rcs_draw * np.sqrt(link.lsf_gain) * phase * np.outer(a_rx, a_tx.conj())


def target_channel_mc(link, tx_arr, rx_arr, n, n_sym, numerology):
    """Monostatic target channel: the co-located arrays share one direction."""
    mono = TargetLink(link.lsf_gain, link.delay, link.doppler_hz, link.rcs_draw,
                      link.aod, link.aod)
    return target_channel_cf(mono, tx_arr, rx_arr, n, n_sym, numerology)


@dataclass(frozen=True)
class RicianChannel:
    lsf: np.ndarray
    k_factor: float
    nlos_draw: np.ndarray
    phase_offset: np.ndarray
    los_component: np.ndarray

    @property
    def value(self):
        """kappa * (NLoS + sqrt(K) e^{j psi} LoS)."""
        extra = self.los_component.ndim - np.ndim(self.phase_offset)
        expand = (...,) + (None,) * extra
        kappa = np.sqrt(self.lsf / (1.0 + self.k_factor))[expand]
        los = np.sqrt(self.k_factor) * np.exp(1j * self.phase_offset)[expand] * self.los_component
        return kappa * (self.nlos_draw + los)


def complex_normal(rng, shape, variance=1.0):
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def rician_channel(beta, k_factor, los, rng, elem_ndim=1):
    """Rician draw with identity NLoS covariance.

    ``los`` holds the unit-modulus array response with the last ``elem_ndim``
    axes being the channel entries; every leading index is an independent
    realization with its own phase offset. ``beta`` broadcasts over the
    leading axes.
    """
    los = np.asarray(los)
    lead = los.shape[: los.ndim - elem_ndim]
    beta = np.broadcast_to(np.asarray(beta, dtype=float), lead)
    nlos = complex_normal(rng, los.shape)
    psi = rng.uniform(0.0, 2 * np.pi, size=lead)
    return RicianChannel(beta, float(k_factor), nlos, psi, los)


def pathloss_lsf(distance, intercept_db, exponent, shadow_sigma_db, rng):
    """Log-distance gain with log-normal shadowing (linear scale)."""
    distance = np.asarray(distance, dtype=float)
    db = intercept_db - 10.0 * exponent * np.log10(distance)
    if shadow_sigma_db > 0:
        db = db + shadow_sigma_db * rng.standard_normal(distance.shape)
    return 10.0 ** (db / 10.0)


def ue_channels(node_pos, arr, ue_pos, n_subcarriers, cfg, rng):
    """UE -> node Rician channels for every subcarrier.

    Returns (h, beta) with h of shape (K, M, N_c, N_a) and beta (K, M). The
    NLoS part and the LoS phase are redrawn on every subcarrier.
    """
    node_pos = np.atleast_2d(node_pos)
    k, m = len(ue_pos), len(node_pos)
    if k == 0:
        return (np.zeros((0, m, n_subcarriers, arr.num_elements), complex), np.zeros((0, m)))
    diff_from = node_pos[None, :, :]
    diff_to = ue_pos[:, None, :]
    dist = _distance(diff_from, diff_to)
    beta = pathloss_lsf(dist, cfg.pathloss_intercept_db, cfg.pathloss_exponent,
                        cfg.shadow_sigma_db, rng)
    az, el = angles_between(diff_from, diff_to)
    los = steering_vector(arr, az, el)  # (K, M, N_a)
    los = np.broadcast_to(los[:, :, None, :], (k, m, n_subcarriers, arr.num_elements))
    chan = rician_channel(beta[:, :, None], cfg.k_factor, los, rng)
    return chan.value, beta


@dataclass(frozen=True)
class ChannelEstimate:
    estimate: np.ndarray
    error_variance: np.ndarray  # per entry
    expected_norm_sq: np.ndarray  # E||h_hat||^2 per channel vector, analytic


def estimate_ue_channel(h, beta, pilot_power, tau_p, noise_var, n_ues, rng, perfect=False):
    """Per-antenna linear MMSE estimate from orthogonal pilots of length tau_p.

    The channel is treated as CN(0, beta I) for the estimator gain. ``beta``
    broadcasts over the leading axes of ``h`` (last axis is antennas).
    """
    if tau_p < n_ues:
        raise PilotContaminationError(f"pilot length {tau_p} < {n_ues} UEs")
    n_a = h.shape[-1]
    beta = np.asarray(beta, dtype=float)
    if perfect:
        return ChannelEstimate(h.copy(), np.zeros_like(beta), n_a * beta)
    snr = pilot_power * tau_p * beta
    gain = snr / (snr + noise_var)
    noise = complex_normal(rng, h.shape, noise_var / (pilot_power * tau_p))
    estimate = gain[..., None] * (h + noise)
    mse = beta - beta * gain
    return ChannelEstimate(estimate, mse, n_a * gain * beta)
