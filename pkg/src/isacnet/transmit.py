"""OFDM numerology, precoders, uniform power split and dual-purpose grid synthesis.

Power budgets are per resource element: a node with budget P radiates
sum(mu) + sum(eta) <= P on every (subcarrier, symbol).
"""

from dataclasses import dataclass

import numpy as np

from .channels import angles_between, steering_vector
from .errors import DegenerateChannelError, InvalidConfigError


@dataclass(frozen=True)
class OfdmNumerology:
    n_subcarriers: int
    scs: float
    cp_duration: float
    n_symbols: int

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.n_symbols < 1:
            raise InvalidConfigError("n_subcarriers", "grid needs at least one subcarrier and symbol")
        if self.scs <= 0 or self.cp_duration < 0:
            raise InvalidConfigError("scs_hz", "spacing must be > 0 and CP >= 0")

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg.n_subcarriers, cfg.scs_hz, cfg.cp_s, cfg.n_symbols)

    @property
    def bandwidth(self):
        return self.n_subcarriers * self.scs

    @property
    def symbol_duration(self):
        return 1.0 / self.scs + self.cp_duration


def build_comm_precoder(estimate, expected_norm_sq):
    """Conjugate of the estimate scaled by the analytic RMS norm of the estimator.

    ``expected_norm_sq`` broadcasts over ``estimate.shape[:-1]``.
    """
    expected_norm_sq = np.asarray(expected_norm_sq, dtype=float)
    if np.any(expected_norm_sq <= 0):
        raise DegenerateChannelError("expected squared norm of the estimate must be > 0")
    return estimate.conj() / np.sqrt(expected_norm_sq)[..., None]


def build_sense_precoder(arr, target_pos, node_pos, literal=False):
    """Beam steered from ``node_pos`` toward ``target_pos``; unit norm unless literal."""
    az, el = angles_between(node_pos, target_pos)
    a = steering_vector(arr, az, el)
    return a if literal else a / np.sqrt(arr.num_elements)


def allocate_power_uniform(budget, n_ues, n_cells):
    """Equal share of the budget for every served UE and probed cell.

    Returns (mu, eta) arrays of length n_ues and n_cells. A node with nothing
    to serve emits nothing.
    """
    if budget <= 0:
        raise InvalidConfigError("p_per_tap_w", "power budget must be > 0")
    consumers = n_ues + n_cells
    if consumers == 0:
        return np.zeros(0), np.zeros(0)
    share = budget / consumers
    return np.full(n_ues, share), np.full(n_cells, share)


@dataclass(frozen=True)
class PrecoderSet:
    """Precoders and powers of one transmit node.

    comm: (K_m, N_c, N_a); sense: (S_m, N_a); comm_powers: (K_m,); sense_powers: (S_m,)
    """

    comm: np.ndarray
    sense: np.ndarray
    comm_powers: np.ndarray
    sense_powers: np.ndarray


def draw_symbols(rng, shape, kind="psk"):
    """Unit-modulus data symbols: uniform phase, or QPSK."""
    if kind == "qpsk":
        phase = np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size=shape)
    else:
        phase = rng.uniform(0.0, 2 * np.pi, size=shape)
    out = np.empty(phase.shape, complex)
    out.real = np.cos(phase)
    out.imag = np.sin(phase)
    return out


@dataclass(frozen=True)
class TransmitGrid:
    signals: np.ndarray  # (M, N_c, N_s, N_a)
    comm_symbols: tuple  # per node: (K_m, N_c, N_s)
    sense_symbols: tuple  # per node: (S_m, N_c, N_s)


def synthesize_grid(precoders, numerology, rng, kind="psk"):
    """Dual-purpose downlink signal of every node on the whole grid.

    s_m(n, n') = sum_k sqrt(mu_k) w_k(n) x_k(n, n') + sum_i sqrt(eta_i) w_0i x_0i(n, n')

    All nodes must share one array size. Symbols are drawn node by node,
    communication streams first.
    """
    n_c, n_s = numerology.n_subcarriers, numerology.n_symbols
    n_nodes = len(precoders)
    if n_nodes == 0:
        return TransmitGrid(np.zeros((0, n_c, n_s, 0), complex), (), ())
    n_a = precoders[0].sense.shape[-1] if precoders[0].sense.size else precoders[0].comm.shape[-1]
    k_max = max(len(p.comm_powers) for p in precoders)
    i_max = max(len(p.sense_powers) for p in precoders)
    # zero-padded stacks so all nodes are combined by one batched product
    w = np.zeros((n_nodes, n_c, k_max + i_max, n_a), complex)
    x = np.zeros((n_nodes, n_c, n_s, k_max + i_max), complex)
    counts = [(len(p.comm_powers), len(p.sense_powers)) for p in precoders]
    pool = draw_symbols(rng, (sum(k + i for k, i in counts), n_c, n_s), kind)
    comm_x, sense_x = [], []
    start = 0
    for m, pre in enumerate(precoders):
        k, i = counts[m]
        xk, x0 = pool[start:start + k], pool[start + k:start + k + i]
        start += k + i
        if k:
            w[m, :, :k] = (pre.comm * np.sqrt(pre.comm_powers)[:, None, None]).transpose(1, 0, 2)
            x[m, :, :, :k] = xk.transpose(1, 2, 0)
        if i:
            w[m, :, k_max:k_max + i] = (pre.sense * np.sqrt(pre.sense_powers)[:, None])[None]
            x[m, :, :, k_max:k_max + i] = x0.transpose(1, 2, 0)
        comm_x.append(xk)
        sense_x.append(x0)
    return TransmitGrid(x @ w, tuple(comm_x), tuple(sense_x))
