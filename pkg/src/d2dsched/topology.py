"""D2D network geometry: link placement, path loss, and receiver mobility.

A network of K device-to-device links is a set of transmitter positions,
receiver positions, and a K x K matrix of path-loss exponents.  Distances
and linear power gains are derived from positions on demand, so moving a
receiver never leaves a stale cached matrix behind.

Indices are 0-based throughout: ``k`` is the receiving link, ``l`` the
transmitting link, and entry ``[k, l]`` of any derived matrix refers to the
path from transmitter ``l`` to receiver ``k``.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

_PLACEMENT_ATTEMPTS = 10_000


@dataclass(frozen=True)
class MobilityConfig:
    """Random-walk displacement applied to receivers every few blocks."""

    step_meters: float = 1.0
    period_blocks: int = 10
    enabled: bool = False

    def __post_init__(self):
        if self.step_meters < 0:
            raise ParameterError("mobility step must be >= 0 m")
        if self.period_blocks < 1:
            raise ParameterError("mobility period must be >= 1 block")


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """Immutable snapshot of link geometry and path-loss exponents.

    tx_positions, rx_positions: (K, 2) arrays in meters.
    beta: (K, K) path-loss exponents, all > 2 so the ergodic integrals stay
    well behaved at the deployment scales used here.
    """

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    beta: np.ndarray
    area_side: float

    def __post_init__(self):
        tx = np.atleast_2d(np.asarray(self.tx_positions, dtype=float))
        rx = np.atleast_2d(np.asarray(self.rx_positions, dtype=float))
        beta = np.asarray(self.beta, dtype=float)
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)
        object.__setattr__(self, "beta", beta)
        k = tx.shape[0]
        if k < 1 or tx.shape[1] != 2:
            raise ParameterError("tx_positions must be a (K, 2) array with K >= 1")
        if rx.shape != tx.shape:
            raise ParameterError("rx_positions must match tx_positions in shape")
        if beta.shape != (k, k):
            raise ParameterError("beta must be a (K, K) matrix")
        if not np.all(beta > 2.0):
            raise ParameterError("all path-loss exponents must exceed 2")
        if not np.all(self.distance_matrix() > 0.0):
            raise ParameterError("every transmitter-receiver distance must be positive")
        if self.area_side <= 0:
            raise ParameterError("area_side must be positive")
        for arr in (tx, rx, beta):
            arr.flags.writeable = False

    @property
    def n_links(self) -> int:
        return self.tx_positions.shape[0]

    def distance(self, k: int, l: int) -> float:
        """Meters from transmitter ``l`` to receiver ``k``."""
        return float(np.hypot(*(self.rx_positions[k] - self.tx_positions[l])))

    def distance_matrix(self) -> np.ndarray:
        diff = self.rx_positions[:, None, :] - self.tx_positions[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=2))

    def gain_matrix(self) -> np.ndarray:
        """Linear power gains d^(-beta) for every transmitter-receiver pair."""
        return self.distance_matrix() ** (-self.beta)

    def to_dict(self) -> dict:
        return {
            "area_side": self.area_side,
            "tx_positions": self.tx_positions.tolist(),
            "rx_positions": self.rx_positions.tolist(),
            "beta": self.beta.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkTopology":
        return cls(
            tx_positions=np.array(data["tx_positions"], dtype=float),
            rx_positions=np.array(data["rx_positions"], dtype=float),
            beta=np.array(data["beta"], dtype=float),
            area_side=float(data["area_side"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "NetworkTopology":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def path_gain(topology: NetworkTopology, k: int, l: int) -> float:
    """Linear power gain d_{k,l}^(-beta_{k,l}) from transmitter l to receiver k."""
    n = topology.n_links
    if not (0 <= k < n and 0 <= l < n):
        raise ParameterError(f"link indices must lie in [0, {n})")
    return float(topology.distance(k, l) ** (-topology.beta[k, l]))


def _place_receiver(rng, tx, k, link_distance, area_side, min_separation):
    """Sample a receiver at exactly ``link_distance`` from its transmitter.

    The angle is uniform; draws landing outside the deployment square or
    within ``min_separation`` of any other transmitter are rejected so the
    stated link distance is preserved exactly.
    """
    for _ in range(_PLACEMENT_ATTEMPTS):
        angle = rng.uniform(0.0, 2.0 * math.pi)
        pos = tx[k] + link_distance * np.array([math.cos(angle), math.sin(angle)])
        if not (0.0 <= pos[0] <= area_side and 0.0 <= pos[1] <= area_side):
            continue
        d_cross = np.hypot(*(tx - pos).T)
        d_cross[k] = np.inf  # own link is at link_distance by construction
        if np.all(d_cross >= min_separation):
            return pos
    raise ParameterError(
        f"could not place receiver {k}: geometry leaves no admissible angle"
    )


def generate_topology(
    n_links: int,
    area_side: float,
    link_distance: float,
    beta_low: float,
    beta_high: float,
    seed,
    min_separation: float = 1.0,
) -> NetworkTopology:
    """Drop transmitters uniformly in a square and receivers on fixed-radius circles.

    Each receiver sits at exactly ``link_distance`` from its transmitter at a
    uniform random angle.  Path-loss exponents are drawn IID uniform on
    [beta_low, beta_high].  ``min_separation`` is a floor on cross-link
    distances (receiver to foreign transmitter) that keeps linear gains from
    exceeding one when devices would otherwise collide; it is a modelling
    knob, not a physical datum.
    """
    if n_links < 1:
        raise ParameterError("n_links must be >= 1")
    if area_side <= 0:
        raise ParameterError("area_side must be positive")
    if not (0 < link_distance < area_side):
        raise ParameterError("link_distance must lie in (0, area_side)")
    if beta_low > beta_high:
        raise ParameterError("beta_low must not exceed beta_high")
    if beta_low <= 2.0:
        raise ParameterError("path-loss exponents must exceed 2")
    if min_separation < 0:
        raise ParameterError("min_separation must be >= 0")

    rng = np.random.default_rng(seed)
    tx = rng.uniform(0.0, area_side, size=(n_links, 2))
    rx = np.empty_like(tx)
    for k in range(n_links):
        rx[k] = _place_receiver(rng, tx, k, link_distance, area_side, min_separation)
    beta = rng.uniform(beta_low, beta_high, size=(n_links, n_links))
    return NetworkTopology(tx, rx, beta, area_side)


def apply_mobility(topology: NetworkTopology, config: MobilityConfig, seed) -> NetworkTopology:
    """Displace every receiver by exactly ``step_meters`` in a random direction.

    Transmitters and path-loss exponents are untouched.  Directions that
    would bring a receiver within 1 m of a foreign transmitter are redrawn;
    receivers may wander outside the original deployment square.
    """
    if not config.enabled:
        raise ParameterError("apply_mobility called with mobility disabled")
    if config.step_meters == 0.0:
        return topology
    rng = np.random.default_rng(seed)
    tx = topology.tx_positions
    rx = topology.rx_positions.copy()
    for k in range(topology.n_links):
        for _ in range(_PLACEMENT_ATTEMPTS):
            angle = rng.uniform(0.0, 2.0 * math.pi)
            pos = rx[k] + config.step_meters * np.array(
                [math.cos(angle), math.sin(angle)]
            )
            d_cross = np.hypot(*(tx - pos).T)
            d_cross[k] = np.inf
            if np.all(d_cross >= 1.0) and np.hypot(*(tx[k] - pos)) > 0.0:
                rx[k] = pos
                break
        else:
            raise ParameterError(f"mobility step strands receiver {k}")
    return NetworkTopology(tx, rx, topology.beta, topology.area_side)
