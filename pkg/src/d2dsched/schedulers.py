"""Link scheduling policies: one interface, eight strategies.

Every policy maps (history, side information) to a length-K on/off action
for the next fading block.  Statistical-CSI policies (exhaustive search,
per-cluster quasi-optimal search) act on long-term gains; the clustered
UCB policy learns from one-bit feedback only; the per-block baselines react
to instantaneous channel estimates or to nothing at all.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import LinkBudget
from .clustering import ClusterPartition
from .ergodic import ActionSweep, QuadratureConfig, action_from_index
from .errors import CapacityError, ContractError, ParameterError
from .topology import NetworkTopology


class SchedulerKind(Enum):
    EXHAUSTIVE_OPTIMAL = "exhaustive_optimal"
    LQUASIOPT = "lquasiopt"
    BANDITLINQ = "banditlinq"
    FLAT_UCB1 = "flat_ucb1"
    ITLINQ = "itlinq"
    D_ONOFF = "d_onoff"
    RANDOM = "random"
    NO_SCHEDULING = "no_scheduling"


_BANDIT_KINDS = (SchedulerKind.BANDITLINQ, SchedulerKind.FLAT_UCB1)


@dataclass
class BanditState:
    """Per-cluster UCB statistics for the clustered one-bit-feedback policy.

    ``counts`` and ``reward_sums`` hold one array per cluster, indexed by
    sub-action.  Under a discount factor w < 1 both are scaled by w before
    every update, which realizes the exponentially weighted running mean
    with O(1) work per block.  ``t`` counts completed scheduling blocks.
    """

    partition: ClusterPartition
    counts: list
    reward_sums: list
    alpha: float
    w: float
    reward_range: float
    t: int = 0

    @property
    def n_links(self) -> int:
        return self.partition.n_links

    def arm_means(self, c: int) -> np.ndarray:
        counts = self.counts[c]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(counts > 0, self.reward_sums[c] / counts, 0.0)


def make_bandit_state(
    partition: ClusterPartition,
    reward_range: float,
    alpha: float = 4.0,
    discount: float = 1.0,
    cap: int = 20,
) -> BanditState:
    """Fresh bandit statistics for a partition; guards the per-cluster arm count."""
    if alpha <= 0:
        raise ParameterError("alpha must be positive")
    if not (0.0 < discount <= 1.0):
        raise ParameterError("discount must lie in (0, 1]")
    if reward_range <= 0:
        raise ParameterError("reward_range must be positive")
    if max(partition.sizes) > cap:
        raise CapacityError(
            f"cluster of size {max(partition.sizes)} needs 2^{max(partition.sizes)} "
            f"arms, beyond cap {cap}"
        )
    counts = [np.zeros(1 << size) for size in partition.sizes]
    sums = [np.zeros(1 << size) for size in partition.sizes]
    return BanditState(partition, counts, sums, alpha, discount, float(reward_range))


def _scatter(partition: ClusterPartition, sub_bits) -> np.ndarray:
    action = np.zeros(partition.n_links, dtype=np.uint8)
    for members, bits in zip(partition.clusters, sub_bits):
        action[list(members)] = bits
    return action


def banditlinq_select(state: BanditState) -> tuple[tuple, np.ndarray]:
    """Choose one sub-action per cluster and concatenate the full action.

    Clusters still holding untried sub-actions pick the lowest-index
    untried one (all clusters initialize concurrently).  Otherwise each
    cluster maximizes the upper confidence bound

        mean + sqrt(alpha * 2^(K - Kc) * (sum r)^2 * ln t / (2 * trials)),

    whose 2^(K - Kc) inflation pays for averaging out the other clusters'
    interference.  Ties resolve to the lowest sub-action index.
    """
    k = state.n_links
    t = state.t + 1
    log_t = math.log(t)
    chosen = []
    sub_bits = []
    for c, members in enumerate(state.partition.clusters):
        counts = state.counts[c]
        untried = np.flatnonzero(counts == 0.0)
        if untried.size:
            j = int(untried[0])
        else:
            kc = len(members)
            scale = state.alpha * (2.0 ** (k - kc)) * state.reward_range ** 2
            bound = state.arm_means(c) + np.sqrt(scale * log_t / (2.0 * counts))
            j = int(np.argmax(bound))
        chosen.append(j)
        sub_bits.append(action_from_index(j, len(members)))
    return tuple(chosen), _scatter(state.partition, sub_bits)


def banditlinq_update(state: BanditState, selected, observed: float) -> BanditState:
    """Credit one global sum-throughput to every cluster's selected arm.

    The same scalar updates each cluster (the cluster utility is the full
    network's throughput averaged over foreign clusters' behavior, so every
    cluster learns from the same observation).  Mutates and returns
    ``state``.
    """
    if not (-1e-9 <= observed <= state.reward_range + 1e-9):
        raise ContractError(
            f"observed throughput {observed} outside [0, {state.reward_range}]"
        )
    if len(selected) != state.partition.n_clusters:
        raise ParameterError("one selected sub-action per cluster required")
    if state.w < 1.0:
        for c in range(state.partition.n_clusters):
            state.counts[c] *= state.w
            state.reward_sums[c] *= state.w
    for c, j in enumerate(selected):
        state.counts[c][j] += 1.0
        state.reward_sums[c][j] += observed
    state.t += 1
    return state


def flat_ucb1(state: BanditState) -> np.ndarray:
    """UCB over the full 2^K action space: the single-cluster special case."""
    if state.partition.n_clusters != 1:
        raise ParameterError("flat UCB needs the all-links-in-one-cluster partition")
    return banditlinq_select(state)[1]


def lquasiopt_schedule(
    topology: NetworkTopology,
    partition: ClusterPartition,
    budget: LinkBudget,
    m: int,
    quad: QuadratureConfig | None = None,
    stats: dict | None = None,
) -> np.ndarray:
    """Per-cluster exhaustive maximization of the cluster utility.

    Each cluster independently sweeps its 2^Kc sub-actions (foreign
    clusters averaged as fair coin flips) and the winners are concatenated,
    costing sum_c 2^Kc utility evaluations instead of 2^K.  ``stats``, when
    given, receives the exact evaluation counts.
    """
    if partition.n_links != topology.n_links:
        raise ParameterError("partition must cover exactly the topology's links")
    sweep = ActionSweep(topology, budget, m, quad)
    sub_bits = []
    per_cluster = []
    for c in range(partition.n_clusters):
        bits, _, n_evals = sweep.best_cluster_action(partition, c)
        sub_bits.append(bits)
        per_cluster.append(n_evals)
    if stats is not None:
        stats["evaluations"] = int(sum(per_cluster))
        stats["per_cluster"] = per_cluster
    return _scatter(partition, sub_bits)


def itlinq_schedule(
    topology: NetworkTopology,
    fading: np.ndarray,
    budget: LinkBudget,
    eta: float = 0.7,
) -> np.ndarray:
    """Information-theoretic sequential admission from per-block estimates.

    Links are considered in index order; a candidate joins when the
    interference it trades with every already-admitted link stays below its
    own SNR raised to ``eta``.  Link 0 is always admitted.
    """
    if not (0.0 < eta <= 1.0):
        raise ParameterError("eta must lie in (0, 1]")
    power = budget.snr * fading * topology.gain_matrix()
    k = topology.n_links
    admitted = [0]
    for j in range(1, k):
        threshold = power[j, j] ** eta
        ok = all(
            power[j, i] <= threshold and power[i, j] <= threshold for i in admitted
        )
        if ok:
            admitted.append(j)
    action = np.zeros(k, dtype=np.uint8)
    action[admitted] = 1
    return action


def estimate_pathloss_exponents(topology: NetworkTopology, seed) -> np.ndarray:
    """Noisy direct-link exponent estimates: beta_kk plus-or-minus U(0, 0.5).

    Drawn once per topology; a receiver's estimation error is a property of
    its environment, not of time.
    """
    rng = np.random.default_rng(seed)
    err = rng.uniform(0.0, 0.5, topology.n_links)
    sign = rng.choice([-1.0, 1.0], topology.n_links)
    return np.diagonal(topology.beta) + sign * err


def d_onoff_schedule(
    topology: NetworkTopology,
    fading: np.ndarray,
    density: float,
    kappa: float = 1.0,
    beta_hat: np.ndarray | None = None,
) -> np.ndarray:
    """Distributed on-off power control: per-link fading threshold test.

    Link k transmits when its measured direct-link power |h|^2 d^-beta
    clears -ln(min{sinc(2/b) / (pi * density * kappa^(2/b) * d^2), 1}) / d^b
    with b the link's estimated exponent.  ``density`` is links per square
    meter and ``kappa`` the linear target SIR.
    """
    if density <= 0:
        raise ParameterError("density must be positive")
    if kappa <= 0:
        raise ParameterError("kappa must be positive")
    beta_true = np.diagonal(topology.beta)
    b = beta_true if beta_hat is None else np.asarray(beta_hat, dtype=float)
    if b.shape != beta_true.shape:
        raise ParameterError("beta_hat must hold one exponent per link")
    d = np.array([topology.distance(k, k) for k in range(topology.n_links)])
    measured = np.diagonal(fading) * d ** (-beta_true)
    ratio = np.sinc(2.0 / b) / (math.pi * density * kappa ** (2.0 / b) * d ** 2)
    threshold = -np.log(np.minimum(ratio, 1.0)) / d ** b
    return (measured > threshold).astype(np.uint8)


def random_schedule(n_links: int, seed) -> np.ndarray:
    """Uniform draw over all 2^K actions."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=n_links).astype(np.uint8)


def no_scheduling(n_links: int) -> np.ndarray:
    """Activate every link."""
    return np.ones(n_links, dtype=np.uint8)


def random_explore_then_commit(
    topology: NetworkTopology,
    budget: LinkBudget,
    m: int,
    n_trials: int,
    seed,
    quad: QuadratureConfig | None = None,
) -> np.ndarray:
    """Evaluate ``n_trials`` distinct random actions; commit to the best.

    The exploration-budget-matched baseline for the per-cluster search:
    same number of utility evaluations, no structure.  With n_trials = 2^K
    this degenerates to the exhaustive optimum.
    """
    k = topology.n_links
    if k > 30:
        raise CapacityError("action space too large to sample without replacement")
    n_actions = 1 << k
    if not (1 <= n_trials <= n_actions):
        raise ParameterError(f"n_trials must lie in [1, 2^{k}]")
    rng = np.random.default_rng(seed)
    indices = np.sort(rng.choice(n_actions, size=n_trials, replace=False))
    sweep = ActionSweep(topology, budget, m, quad)
    best_idx = None
    best_val = -np.inf
    for idx in indices:
        bits = action_from_index(int(idx), k)
        val = sweep.sum_se(bits)
        if val > best_val:  # sorted indices: first strict max is lowest index
            best_val = val
            best_idx = int(idx)
    return action_from_index(best_idx, k)
