"""Partitioning links into clusters of mutually strong interferers.

Three drivers produce the pairwise dissimilarity consumed by the
size-capped agglomerative step: exact path-loss knowledge, one-bit
interference feedback collected over a short measurement phase, or nothing
at all (random balanced partition).  Small dissimilarity means strong
mutual interference, so heavy interferers end up in the same cluster and
get scheduled jointly.
"""

from dataclasses import dataclass

import numpy as np

from .channel import LinkBudget, _fill_fading, _validate_nakagami_m
from .errors import ParameterError
from .topology import NetworkTopology


@dataclass(frozen=True, eq=False)
class ClusterPartition:
    """Disjoint cover of link indices {0..K-1}.

    Clusters are stored as ascending index tuples and ordered by their
    smallest member, giving every partition a unique canonical form.
    """

    clusters: tuple

    def __post_init__(self):
        canon = tuple(tuple(sorted(int(i) for i in c)) for c in self.clusters)
        canon = tuple(sorted(canon, key=lambda c: c[0] if c else -1))
        object.__setattr__(self, "clusters", canon)
        flat = [i for c in canon for i in c]
        if not flat:
            raise ParameterError("partition must contain at least one link")
        if any(len(c) == 0 for c in canon):
            raise ParameterError("clusters must be nonempty")
        if sorted(flat) != list(range(len(flat))):
            raise ParameterError("clusters must cover {0..K-1} exactly once")

    @property
    def n_links(self) -> int:
        return sum(len(c) for c in self.clusters)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def sizes(self) -> tuple:
        return tuple(len(c) for c in self.clusters)

    @classmethod
    def single(cls, n_links: int) -> "ClusterPartition":
        return cls((tuple(range(n_links)),))


def _validate_dissimilarity(matrix: np.ndarray) -> np.ndarray:
    d = np.asarray(matrix, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ParameterError("dissimilarity must be a square matrix")
    if not np.allclose(d, d.T):
        raise ParameterError("dissimilarity must be symmetric")
    if np.any(np.diagonal(d) != 0.0):
        raise ParameterError("dissimilarity diagonal must be zero")
    if np.any(d < 0.0):
        raise ParameterError("dissimilarities must be nonnegative")
    return d


def pairwise_onebit(snr_i: float, inr_ij: float, inr_ji: float, eta: float) -> int:
    """One bit of pairwise distance: 1 when both cross-interference levels
    stay below snr_i**eta, 0 when either direction interferes heavily."""
    if snr_i <= 0:
        raise ParameterError("snr_i must be positive")
    if inr_ij < 0 or inr_ji < 0:
        raise ParameterError("INR values must be nonnegative")
    if not (0.0 < eta <= 1.0):
        raise ParameterError("eta must lie in (0, 1]")
    threshold = snr_i ** eta
    return int(inr_ij < threshold and inr_ji < threshold)


def collect_clustering_feedback(
    topology: NetworkTopology,
    budget: LinkBudget,
    m: int,
    eta: float,
    t_clust: int,
    seed,
) -> np.ndarray:
    """Average the one-bit pairwise distance over a measurement phase.

    During the phase every link transmits on its own band, so each receiver
    sees its SNR and the per-interferer INRs without contamination.  The
    averaged bits are symmetrized (receiver i's report and receiver j's
    report carry equal weight) and the diagonal is forced to zero.
    """
    if t_clust < 1:
        raise ParameterError("t_clust must be >= 1")
    m = _validate_nakagami_m(m)
    if not (0.0 < eta <= 1.0):
        raise ParameterError("eta must lie in (0, 1]")
    k = topology.n_links
    gain = topology.gain_matrix()
    rng = np.random.default_rng(seed)
    acc = np.zeros((k, k))
    for _ in range(t_clust):
        power = budget.snr * _fill_fading(rng, k, m, 1)[0] * gain
        # row i threshold SNR_i^eta gates both directions of pair (i, j)
        thr = (np.diagonal(power) ** eta)[:, None]
        acc += (power < thr) & (power.T < thr)
    p = acc / t_clust
    p = (p + p.T) / 2.0
    np.fill_diagonal(p, 0.0)
    return p


def pathloss_dissimilarity(topology: NetworkTopology) -> np.ndarray:
    """Dissimilarity from long-term gains: 1 / (1 + max cross power gain).

    Strong mutual interference in either direction maps to a small
    distance, so such pairs merge early.
    """
    gain = topology.gain_matrix()
    mutual = np.maximum(gain, gain.T)
    d = 1.0 / (1.0 + mutual)
    np.fill_diagonal(d, 0.0)
    return d


def hierarchical_cluster(dissim: np.ndarray, max_cluster_size: int) -> ClusterPartition:
    """Size-capped agglomerative clustering with average linkage.

    Greedily merges the pair of clusters with the smallest average pairwise
    dissimilarity, skipping any merge whose result would exceed
    ``max_cluster_size``, until no admissible merge remains.  Ties break on
    the smallest member indices so the output is deterministic.
    """
    if max_cluster_size < 1:
        raise ParameterError("max_cluster_size must be >= 1")
    d = _validate_dissimilarity(dissim)
    k = d.shape[0]
    clusters = [[i] for i in range(k)]
    link = d.copy()  # average linkage between current clusters

    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                if len(clusters[a]) + len(clusters[b]) > max_cluster_size:
                    continue
                key = (link[a, b], clusters[a][0], clusters[b][0])
                if best is None or key < best[0]:
                    best = (key, a, b)
        if best is None:
            break
        _, a, b = best
        na, nb = len(clusters[a]), len(clusters[b])
        merged_link = (na * link[a, :] + nb * link[b, :]) / (na + nb)
        link[a, :] = merged_link
        link[:, a] = merged_link
        link[a, a] = 0.0
        link = np.delete(np.delete(link, b, axis=0), b, axis=1)
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]
    return ClusterPartition(tuple(tuple(c) for c in clusters))


def random_cluster(n_links: int, n_clusters: int, seed) -> ClusterPartition:
    """Uniform random balanced partition; sizes differ by at most one."""
    if not (1 <= n_clusters <= n_links):
        raise ParameterError("n_clusters must lie in [1, n_links]")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_links)
    base, extra = divmod(n_links, n_clusters)
    clusters = []
    start = 0
    for c in range(n_clusters):
        size = base + (1 if c < extra else 0)
        clusters.append(tuple(sorted(int(i) for i in perm[start : start + size])))
        start += size
    return ClusterPartition(tuple(clusters))
