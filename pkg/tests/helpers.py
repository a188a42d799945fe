"""Random small sensing instances shared by the detector and acceptance tests."""

import numpy as np

from isacnet.channels import complex_normal
from isacnet.detector import build_response_cf, build_response_mc
from isacnet.geometry import ArrayConfig, TargetState
from isacnet.transmit import OfdmNumerology

WAVELENGTH = 0.1


def random_target(rng, speed=10.0):
    pos = np.array([*rng.uniform(0, 1000, 2), rng.uniform(20, 100)])
    heading = rng.uniform(0, 2 * np.pi)
    return TargetState(pos, speed * np.array([np.cos(heading), np.sin(heading), 0.0]), 10.0)


def random_nodes(rng, n, height=10.0):
    return np.column_stack([rng.uniform(0, 1000, (n, 2)), np.full(n, height)])


def small_cf_instance(rng, max_na=4, max_nc=3, max_ns=2, max_tx=3, max_rx=3):
    """Random bistatic response with random (non-unit) transmit signals."""
    n_a = int(rng.integers(1, max_na + 1))
    n_c = int(rng.integers(1, max_nc + 1))
    n_s = int(rng.integers(1, max_ns + 1))
    n_tx = int(rng.integers(1, max_tx + 1))
    n_rx = int(rng.integers(1, max_rx + 1))
    arr = ArrayConfig(n_a)
    num = OfdmNumerology(n_c, 30e3, 2.34e-6, n_s)
    signals = complex_normal(rng, (n_tx, n_c, n_s, n_a))
    resp = build_response_cf(random_nodes(rng, n_tx), arr, random_nodes(rng, n_rx), arr,
                             random_target(rng), signals, num, WAVELENGTH)
    return resp, num


def colocated_pair(rng):
    """The same node used as the only tAP and the only rAP, plus the matching
    monostatic response."""
    n_a = int(rng.integers(1, 9))
    n_c = int(rng.integers(1, 13))
    n_s = int(rng.integers(1, 15))
    arr = ArrayConfig(n_a)
    num = OfdmNumerology(n_c, 30e3, 2.34e-6, n_s)
    node = random_nodes(rng, 1)
    target = random_target(rng)
    signal = complex_normal(rng, (n_c, n_s, n_a))
    cf = build_response_cf(node, arr, node, arr, target, signal[None], num, WAVELENGTH)
    mc = build_response_mc(node[0], arr, arr, target, signal, num, WAVELENGTH)
    return cf, mc


def observation_like(response, rng, scale=1.0):
    return [complex_normal(rng, response.block_shape(l)[:-1], scale) for l in range(len(response))]
