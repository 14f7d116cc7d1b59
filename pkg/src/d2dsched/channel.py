"""Per-block fading, instantaneous SINR rates, and one-bit ACK/NACK feedback.

Fading is block-constant: one (K, K) matrix of squared channel magnitudes
per coherence interval, redrawn independently across blocks.  Entry
``[k, l]`` is the squared fading magnitude from transmitter ``l`` to
receiver ``k``.  Direct links are Nakagami-m (squared magnitude
Gamma(m, m), unit mean), cross links are Rayleigh (squared magnitude
Exponential(1)).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParameterError
from .topology import NetworkTopology


@dataclass(frozen=True, eq=False)
class LinkBudget:
    """Transmit SNR and per-link target rates shared by every block.

    ``snr`` is the linear ratio P / sigma^2.  ``target_rates`` holds the
    per-link rate thresholds r_k (bits/sec/Hz) that drive ACK/NACK feedback;
    their sum is the range of the sum-throughput reward.
    """

    snr: float
    target_rates: np.ndarray

    def __post_init__(self):
        rates = np.atleast_1d(np.asarray(self.target_rates, dtype=float))
        object.__setattr__(self, "target_rates", rates)
        if self.snr <= 0:
            raise ParameterError("snr must be positive")
        if not np.all(rates > 0):
            raise ParameterError("all target rates must be positive")
        rates.flags.writeable = False

    @classmethod
    def from_physical(cls, tx_power_mw: float, noise_dbm: float, target_rates) -> "LinkBudget":
        """Build the budget from transmit power in mW and noise power in dBm.

        The quoted noise figure is treated as total noise power; both knobs
        stay configurable because no bandwidth is specified to integrate a
        true spectral density.
        """
        if tx_power_mw <= 0:
            raise ParameterError("transmit power must be positive")
        noise_mw = 10.0 ** (noise_dbm / 10.0)
        return cls(snr=tx_power_mw / noise_mw, target_rates=target_rates)

    @property
    def n_links(self) -> int:
        return self.target_rates.shape[0]

    @property
    def sum_target(self) -> float:
        return float(self.target_rates.sum())


def _validate_nakagami_m(m) -> int:
    if not float(m).is_integer() or m < 1:
        raise ParameterError("Nakagami shape m must be a positive integer")
    return int(m)


def _fill_fading(rng, n_links: int, m: int, n_blocks: int) -> np.ndarray:
    """Draw squared fading magnitudes for ``n_blocks`` blocks at once.

    Draw order is fixed (cross matrix first, then the direct-link entries)
    so a stream position depends only on how many blocks were consumed.
    The Gamma(m, m) direct-link law is realized as a mean of m unit
    exponentials, which is exact for integer m.
    """
    gains2 = rng.exponential(size=(n_blocks, n_links, n_links))
    diag = rng.exponential(size=(n_blocks, n_links, m)).sum(axis=2) / m
    idx = np.arange(n_links)
    gains2[:, idx, idx] = diag
    return gains2


def sample_fading(n_links: int, m: int, seed) -> np.ndarray:
    """One block of squared fading magnitudes |h|^2 as a (K, K) matrix."""
    if n_links < 1:
        raise ParameterError("n_links must be >= 1")
    m = _validate_nakagami_m(m)
    rng = np.random.default_rng(seed)
    return _fill_fading(rng, n_links, m, 1)[0]


def instantaneous_rates(
    topology: NetworkTopology,
    fading: np.ndarray,
    action: np.ndarray,
    budget: LinkBudget,
) -> np.ndarray:
    """Per-link Shannon rates log2(1 + SINR) for one fading block.

    Inactive links get rate 0; every active link sees the interference of
    every other active link plus thermal noise 1/snr.
    """
    bits = np.asarray(action, dtype=float)
    power = fading * topology.gain_matrix()
    own = np.diagonal(power)
    signal = own * bits
    interference = power @ bits - own * bits
    return np.log2(1.0 + signal / (interference + 1.0 / budget.snr))


def instantaneous_rate(
    topology: NetworkTopology,
    fading: np.ndarray,
    action: np.ndarray,
    budget: LinkBudget,
    k: int,
) -> float:
    """Rate of link ``k`` under ``action`` for one fading block."""
    return float(instantaneous_rates(topology, fading, action, budget)[k])


def instantaneous_sum_se(
    topology: NetworkTopology,
    fading: np.ndarray,
    action: np.ndarray,
    budget: LinkBudget,
) -> float:
    """Sum-spectral efficiency of one block: total of all per-link rates."""
    return float(instantaneous_rates(topology, fading, action, budget).sum())


def _batch_rates(
    gain: np.ndarray, fading_batch: np.ndarray, bits: np.ndarray, snr: float
) -> np.ndarray:
    """Per-link rates for a batch of fading blocks sharing one action."""
    weighted = gain * bits[None, :]
    idx = np.arange(gain.shape[0])
    signal = fading_batch[:, idx, idx] * (np.diagonal(gain) * bits)[None, :]
    interference = np.einsum("nkl,kl->nk", fading_batch, weighted)
    interference -= fading_batch[:, idx, idx] * weighted[idx, idx][None, :]
    return np.log2(1.0 + signal / (interference + 1.0 / snr))


def one_bit_feedback(
    rates: np.ndarray, budget: LinkBudget, flip_prob: float, seed
) -> np.ndarray:
    """ACK/NACK bits: 1 when a link's rate beats its target, then noisy.

    Each bit is flipped independently with probability ``flip_prob`` to
    model feedback-channel errors.
    """
    if not (0.0 <= flip_prob < 0.5):
        raise ParameterError("flip_prob must lie in [0, 0.5)")
    acks = (np.asarray(rates, dtype=float) > budget.target_rates).astype(np.uint8)
    if flip_prob > 0.0:
        rng = np.random.default_rng(seed)
        flips = rng.random(acks.shape[0]) < flip_prob
        acks = acks ^ flips.astype(np.uint8)
    return acks


def sum_throughput(acks: np.ndarray, budget: LinkBudget) -> float:
    """Total of target rates over ACKed links; bounded by sum(target_rates)."""
    acks = np.asarray(acks)
    if acks.shape != budget.target_rates.shape:
        raise ContractError("ACK vector length must match the number of links")
    return float(budget.target_rates @ acks)
