"""Stacked sensing responses, GLRT statistics, thresholds and sensing SNR.

Stacking order of a rAP observation over the frame is fixed: antenna index
fastest, then subcarrier, then OFDM symbol: a block of shape
(N_s, N_c, N_rx, M) reshaped to (-1, M) is the stacked response matrix.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .channels import (angles_between, bistatic_delay_doppler, complex_normal,
                       delay_phase, doppler_phase, steering_vector, target_lsf_bistatic)
from .errors import UndefinedTestError

EPS = np.finfo(float).eps


class StackedSensingResponse:
    """Per-rAP sensing response over the full time-frequency grid.

    Two storage forms. ``blocks``: one array (N_s, N_c, N_rx, M) per rAP,
    any content. Factored: ``coef`` (L, N_s, N_c, M) and ``rx_steering``
    (L, N_rx), meaning column m of rAP l at (n, n') is
    coef[l, n', n, m] * rx_steering[l]; this is the rank-1 structure of a
    LoS target channel and lets the Gram matrices be accumulated over resource
    elements without building the stacked matrix. The multi-cell response is
    a single rAP with a single column.
    """

    def __init__(self, blocks=None, coef=None, rx_steering=None):
        if (blocks is None) == (coef is None):
            raise ValueError("give either blocks or coef/rx_steering")
        if blocks is not None:
            self._blocks = tuple(np.asarray(b, dtype=complex) for b in blocks)
            self.coef = self.rx_steering = None
            first = self._blocks[0].shape
            self._n_rx, self.n_columns = first[2], first[3]
        else:
            self._blocks = None
            self.coef = np.asarray(coef, dtype=complex)
            self.rx_steering = np.asarray(rx_steering, dtype=complex)
            self._n_rx, self.n_columns = self.rx_steering.shape[1], self.coef.shape[-1]

    def __len__(self):
        return len(self._blocks) if self._blocks is not None else len(self.coef)

    def block(self, l):
        if self._blocks is not None:
            return self._blocks[l]
        return self.coef[l][:, :, None, :] * self.rx_steering[l][None, None, :, None]

    @property
    def blocks(self):
        return tuple(self.block(l) for l in range(len(self)))

    def block_shape(self, l):
        if self._blocks is not None:
            return self._blocks[l].shape
        s, n, m = self.coef.shape[1:]
        return (s, n, self._n_rx, m)

    def explicit(self, l):
        """Stacked matrix: rows ordered antenna fastest, then subcarrier, then symbol."""
        return self.block(l).reshape(-1, self.n_columns)

    def gram(self, l):
        """D^H D accumulated over resource elements."""
        if self._blocks is None:
            c = self.coef[l].reshape(-1, self.n_columns)
            a = self.rx_steering[l]
            return np.vdot(a, a).real * (c.conj().T @ c)
        b = self.explicit(l)
        return b.conj().T @ b

    def matched(self, l, y):
        """D^H y for an observation shaped like the block without its last axis.

        Extra leading axes of ``y`` are treated as a batch of observations.
        """
        s, n, a, _ = self.block_shape(l)
        lead = np.shape(y)[:-3]
        y = np.asarray(y).reshape(lead + (s * n * a,))
        if self._blocks is None:
            c = self.coef[l].reshape(-1, self.n_columns)
            proj = y.reshape(lead + (s * n, a)) @ self.rx_steering[l].conj()
            return proj @ c.conj()
        return y @ self.explicit(l).conj()

    def max_dim(self, l):
        s, n, a, m = self.block_shape(l)
        return max(s * n * a, m)

    def ranks(self):
        return [gram_rank(self.gram(l), self.max_dim(l))[0] for l in range(len(self))]

    @property
    def mc_vector(self):
        if len(self) != 1 or self.n_columns != 1:
            raise ValueError("not a single-vector (multi-cell) response")
        return self.explicit(0)[:, 0]

    @classmethod
    def from_matrix(cls, matrices):
        """Wrap explicit stacked matrices (rows, M) as single-RE blocks."""
        return cls(blocks=[np.asarray(d, dtype=complex)[None, None] for d in matrices])


def gram_rank(gram, max_dim):
    """Eigen-decomposition of a Gram matrix and its numerical rank.

    An eigenvalue counts when it exceeds max_dim * eps * lambda_max, the level
    below which a Gram eigenvalue is indistinguishable from rounding.
    """
    lam, vec = np.linalg.eigh(gram)
    top = lam[-1] if lam.size else 0.0
    if top <= 0:
        return 0, lam, vec, np.zeros(lam.shape, bool)
    keep = lam > max_dim * EPS * top
    return int(keep.sum()), lam, vec, keep


def _as_blocks(response, observations):
    if len(observations) != len(response):
        raise ValueError("one observation per rAP is required")
    return [np.asarray(y).reshape(response.block_shape(l)[:-1])
            for l, y in enumerate(observations)]


def glrt_statistic_cf(response, observations):
    """Sum over rAPs of ||P_D y||^2, computed from Gram matrices.

    P_D is the orthogonal projector onto the column space of the stacked
    response; rank-deficient responses use the pseudo-inverse.
    """
    return float(glrt_statistics_cf(response, [np.asarray(y)[None] for y in
                                               _as_blocks(response, observations)])[0])


def glrt_statistics_cf(response, batches):
    """Vectorized statistic: ``batches[l]`` is (T, N_s, N_c, N_rx) for rAP l."""
    if len(batches) != len(response):
        raise ValueError("one observation batch per rAP is required")
    total, usable = 0.0, False
    for l, y in enumerate(batches):
        rank, lam, vec, keep = gram_rank(response.gram(l), response.max_dim(l))
        if rank == 0:
            continue
        usable = True
        coeff = response.matched(l, y) @ vec[:, keep].conj()
        total = total + np.sum(np.abs(coeff) ** 2 / lam[keep], axis=-1)
    if not usable:
        raise UndefinedTestError("all sensing responses are zero")
    return np.atleast_1d(total)


def ml_reflectivity(response, observations):
    """ML reflectivity vectors D^+ y for every rAP."""
    out = []
    for l, y in enumerate(_as_blocks(response, observations)):
        rank, lam, vec, keep = gram_rank(response.gram(l), response.max_dim(l))
        b = response.matched(l, y)
        v = vec[:, keep]
        out.append(v @ ((v.conj().T @ b) / lam[keep]))
    return out


def projection_energy_explicit(d, y):
    """Reference path: ||D D^+ y||^2 with an SVD pseudo-inverse."""
    d = np.asarray(d, dtype=complex)
    y = np.asarray(y, dtype=complex).reshape(-1)
    rcond = max(d.shape) * EPS
    proj = d @ (np.linalg.pinv(d, rcond=rcond) @ y)
    return float(np.vdot(proj, proj).real)


def glrt_statistic_mc(d, y):
    """|d^H y|^2 / ||d||^2."""
    d = np.asarray(d).reshape(-1)
    y = np.asarray(y).reshape(-1)
    energy = np.vdot(d, d).real
    if energy <= 0:
        raise UndefinedTestError("zero monostatic response")
    return float(abs(np.vdot(d, y)) ** 2 / energy)


def threshold_from_pfa(total_rank, noise_var, pfa):
    """Threshold on the projection energy for a target false-alarm rate.

    Under H0 the statistic is Gamma(shape=total_rank, scale=noise_var).
    """
    if total_rank < 1:
        raise UndefinedTestError("total rank must be >= 1")
    if not 0 < pfa < 1:
        raise ValueError(f"pfa must lie in (0, 1), got {pfa}")
    return float(stats.gamma.isf(pfa, a=total_rank, scale=noise_var))


@dataclass(frozen=True)
class GlrtOutcome:
    statistic: float
    threshold: float
    decision: str
    alpha_estimate: object


def run_glrt_cf(response, observations, noise_var, pfa):
    stat = glrt_statistic_cf(response, observations)
    thr = threshold_from_pfa(sum(response.ranks()), noise_var, pfa)
    return GlrtOutcome(stat, thr, "H1" if stat > thr else "H0",
                       ml_reflectivity(response, observations))


def run_glrt_mc(d, y, noise_var, pfa):
    stat = glrt_statistic_mc(d, y)
    thr = threshold_from_pfa(1, noise_var, pfa)
    d = np.asarray(d).reshape(-1)
    alpha = np.vdot(d, np.asarray(y).reshape(-1)) / np.vdot(d, d).real
    return GlrtOutcome(stat, thr, "H1" if stat > thr else "H0", alpha)


def rcs_covariance(rcs, n):
    """Scalar variance -> variance * I; matrices are checked Hermitian PSD."""
    r = np.asarray(rcs)
    if r.ndim == 0:
        return float(r) * np.eye(n)
    if r.shape != (n, n) or not np.allclose(r, r.conj().T):
        raise ValueError("RCS covariance must be a Hermitian n x n matrix")
    if np.linalg.eigvalsh(r)[0] < -1e-12 * max(1.0, np.abs(r).max()):
        raise ValueError("RCS covariance must be positive semidefinite")
    return r


def simulate_observation(response, noise_var, rng, alphas=None):
    """Stacked observations per rAP: D alpha + z under H1, z alone under H0
    (``alphas`` is None)."""
    out = []
    for l in range(len(response)):
        shape = response.block_shape(l)[:-1]
        y = complex_normal(rng, shape, noise_var) if noise_var > 0 else np.zeros(shape, complex)
        if alphas is not None:
            y = y + response.block(l) @ np.asarray(alphas[l])
        out.append(y)
    return out


def sensing_snr_cf(response, rcs_cov, noise_var):
    """sum_l tr(D_l R D_l^H) / (noise_var * sum_l rank(D_l))."""
    m = response.n_columns
    r = rcs_covariance(rcs_cov, m)
    energy, total_rank = 0.0, 0
    for l in range(len(response)):
        g = response.gram(l)
        total_rank += gram_rank(g, response.max_dim(l))[0]
        energy += float(np.sum(r * g.T).real)  # tr(R G) = tr(D R D^H)
    if total_rank == 0:
        raise UndefinedTestError("sensing SNR undefined for zero total rank")
    return energy / (noise_var * total_rank)


def sensing_snr_mc(d, rcs_variance, noise_var):
    """rcs_variance * ||d||^2 / noise_var."""
    d = np.asarray(d).reshape(-1)
    return float(rcs_variance * np.vdot(d, d).real / noise_var)


@dataclass(frozen=True)
class DetectionEstimate:
    pd: float
    ci_low: float
    ci_high: float
    threshold: float
    trials: int


def detection_probability_mc(response, rcs_cov, noise_var, pfa, trials, rng):
    """Monte-Carlo detection rate of the GLRT with a Wilson 95% interval.

    Each trial draws fresh reflectivities alpha ~ CN(0, R) per rAP and fresh noise.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m = response.n_columns
    r = rcs_covariance(rcs_cov, m)
    lam, vec = np.linalg.eigh(r)
    root = vec * np.sqrt(np.clip(lam, 0, None))
    thr = threshold_from_pfa(sum(response.ranks()), noise_var, pfa)
    batches = []
    for l in range(len(response)):
        alphas = complex_normal(rng, (trials, m)) @ root.T
        noise = complex_normal(rng, (trials,) + response.block_shape(l)[:-1], noise_var)
        batches.append(noise + np.einsum("snaj,tj->tsna", response.block(l), alphas))
    hits = int(np.sum(glrt_statistics_cf(response, batches) > thr))
    ci = stats.binomtest(hits, trials).proportion_ci(0.95, method="wilson")
    return DetectionEstimate(hits / trials, float(ci.low), float(ci.high), thr, trials)


# --- response construction ------------------------------------------------

def _tx_beam_products(tx_positions, tx_array, target_pos, signals):
    """a_m^H s_m(n, n') for every node toward the target: (M, N_c, N_s)."""
    az, el = angles_between(tx_positions, target_pos)
    a_tx = steering_vector(tx_array, az, el)
    return np.einsum("ma,mnsa->mns", a_tx.conj(), signals)


def build_response_cf(tx_positions, tx_array, rx_positions, rx_array, target,
                      signals, numerology, wavelength):
    """Bistatic responses: one block per rAP, one column per tAP.

    Column m of rAP l at (n, n') is
    sqrt(beta_ml) a_l a_m^H s_m(n, n') rho_ml(n) xi_ml(n').
    """
    tx_positions = np.atleast_2d(tx_positions)
    rx_positions = np.atleast_2d(rx_positions)
    if signals.shape[0] != len(tx_positions) or signals.shape[-1] != tx_array.num_elements:
        raise ValueError("transmit grid does not match the tAP set")
    n_c, n_s = signals.shape[1], signals.shape[2]
    if (n_c, n_s) != (numerology.n_subcarriers, numerology.n_symbols):
        raise ValueError("transmit grid does not match the numerology")
    p = target.position
    g = _tx_beam_products(tx_positions, tx_array, p, signals)
    tx_b, rx_b = tx_positions[:, None, :], rx_positions[None, :, :]
    beta = target_lsf_bistatic(tx_b, p, rx_b, wavelength)  # (M, L)
    tau, fd = bistatic_delay_doppler(tx_b, p, rx_b, target.velocity, wavelength)
    rho = delay_phase(tau[..., None], np.arange(n_c), numerology.scs)  # (M, L, N_c)
    xi = doppler_phase(fd[..., None], np.arange(n_s), numerology.symbol_duration)  # (M, L, N_s)
    coef = np.sqrt(beta)[:, :, None, None] * rho[:, :, :, None] * xi[:, :, None, :] * g[:, None]
    az, el = angles_between(rx_positions, p)
    a_rx = steering_vector(rx_array, az, el)  # (L, N_rx)
    return StackedSensingResponse(coef=coef.transpose(1, 3, 2, 0), rx_steering=a_rx)


def build_response_mc(bs_position, tx_array, rx_array, target, signal, numerology, wavelength):
    """Monostatic stacked response vector of one BS, as a single-column block."""
    bs = np.asarray(bs_position, dtype=float)
    p = target.position
    n_c, n_s = numerology.n_subcarriers, numerology.n_symbols
    if signal.shape != (n_c, n_s, tx_array.num_elements):
        raise ValueError("transmit grid does not match the BS array or numerology")
    g = _tx_beam_products(bs[None], tx_array, p, signal[None])[0]
    beta = float(target_lsf_bistatic(bs, p, bs, wavelength))
    tau, fd = bistatic_delay_doppler(bs, p, bs, target.velocity, wavelength)
    rho = delay_phase(tau, np.arange(n_c), numerology.scs)
    xi = doppler_phase(fd, np.arange(n_s), numerology.symbol_duration)
    coef = np.sqrt(beta) * rho[:, None] * xi[None, :] * g  # (N_c, N_s)
    az, el = angles_between(bs, p)
    a_rx = steering_vector(rx_array, az, el)
    return StackedSensingResponse(coef=coef.T[None, :, :, None], rx_steering=a_rx[None])
