"""Modularity and greedy (Louvain-style) modularity maximization.

Q(partition) = sum_c [ w_c / m - gamma * (d_c / 2m)^2 ] with w_c the
intra-cluster edge weight, d_c the total weighted degree of cluster c, m the
total edge weight, and gamma the resolution parameter (gamma = 1 is standard
modularity). ``frontier`` sweeps gamma and reports the bias / variance /
exposure trade-off of cluster-randomizing on the inferred partitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clickstream import Session, SessionGraph, build_graph, exposure_share
from .demand import DemandSystem, Metric, Partition, PricePolicy
from .experiment import (
    BiasReport,
    ClusterLevel,
    assign,
    monte_carlo_bias,
)

GAIN_EPS = 1e-12


@dataclass(frozen=True)
class FrontierPoint:
    """One resolution on the bias/variance/exposure frontier.

    ``defined`` is False when the resolution produced fewer than 2 clusters,
    leaving the bias fields NaN. ``share_both_sd`` is the spread of the
    exposure share across the assignment draws.
    """

    resolution: float
    n_clusters: int
    avg_cluster_size: float
    modularity: float
    share_both: float
    share_both_sd: float
    mean_bias: float
    relative_sd: float
    defined: bool = True


def modularity(graph: SessionGraph, partition: Partition, gamma: float = 1.0) -> float:
    """Resolution-parametrized modularity of a partition of the co-view graph."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    m = graph.total_weight
    if m <= 0:
        raise ValueError("modularity is undefined on an empty graph")
    if partition.n != graph.n:
        raise ValueError("partition does not cover the graph's nodes")
    c = partition.cluster_of
    k = partition.n_clusters
    intra = np.zeros(k)
    degree = np.zeros(k)
    for (i, j), w in graph.edges.items():
        degree[c[i]] += w
        degree[c[j]] += w
        if c[i] == c[j]:
            intra[c[i]] += w
    return float((intra / m - gamma * (degree / (2.0 * m)) ** 2).sum())


def _local_move(nbrs: list[dict[int, float]], self_w: list[float], m: float,
                gamma: float, rng: np.random.Generator) -> tuple[np.ndarray, bool]:
    """One local-moving phase; returns (community per node, any_move)."""
    n_nodes = len(nbrs)
    strength = np.array([2.0 * self_w[i] + sum(nbrs[i].values()) for i in range(n_nodes)])
    comm = np.arange(n_nodes)
    sigma_tot = strength.copy()
    two_m2 = 2.0 * m * m

    any_move = False
    while True:
        moved_this_pass = False
        for i in rng.permutation(n_nodes):
            current = comm[i]
            d_i = strength[i]
            # weight from i into each neighboring community
            links: dict[int, float] = {}
            for j, w in nbrs[i].items():
                links[comm[j]] = links.get(comm[j], 0.0) + w
            base_in = links.get(current, 0.0)
            best_comm, best_gain = current, 0.0
            # ascending candidate order breaks near-ties toward the lowest id
            for cand in sorted(links):
                if cand == current:
                    continue
                gain = (links[cand] - base_in) / m - gamma * d_i * (
                    sigma_tot[cand] - (sigma_tot[current] - d_i)
                ) / two_m2
                if gain > best_gain + GAIN_EPS:
                    best_comm, best_gain = cand, gain
            if best_comm != current and best_gain > GAIN_EPS:
                sigma_tot[current] -= d_i
                sigma_tot[best_comm] += d_i
                comm[i] = best_comm
                moved_this_pass = True
                any_move = True
        if not moved_this_pass:
            break
    return comm, any_move


def _aggregate(nbrs: list[dict[int, float]], self_w: list[float],
               comm: np.ndarray) -> tuple[list[dict[int, float]], list[float], np.ndarray]:
    """Collapse communities into supernodes; returns (nbrs, self_w, relabel)."""
    labels = np.unique(comm)
    relabel = np.zeros(comm.max() + 1, dtype=np.int64)
    relabel[labels] = np.arange(labels.size)
    new_comm = relabel[comm]
    k = labels.size
    new_self = [0.0] * k
    new_nbrs: list[dict[int, float]] = [dict() for _ in range(k)]
    for i, loops in enumerate(self_w):
        new_self[new_comm[i]] += loops
    for i in range(len(nbrs)):
        ci = new_comm[i]
        for j, w in nbrs[i].items():
            if j <= i:
                continue
            cj = new_comm[j]
            if ci == cj:
                new_self[ci] += w
            else:
                new_nbrs[ci][cj] = new_nbrs[ci].get(cj, 0.0) + w
                new_nbrs[cj][ci] = new_nbrs[cj].get(ci, 0.0) + w
    return new_nbrs, new_self, new_comm


def louvain(graph: SessionGraph, gamma: float = 1.0, seed: int = 0) -> Partition:
    """Greedy modularity maximization with local moving and aggregation.

    Moves are accepted only for a strict gain (> 1e-12); ties break toward
    the lowest candidate community id; node visit order is shuffled per seed.
    The returned partition never scores below the singleton partition.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    m = graph.total_weight
    if m <= 0:
        raise ValueError("louvain requires a graph with positive total weight")
    rng = np.random.default_rng(seed)

    nbrs: list[dict[int, float]] = [dict() for _ in range(graph.n)]
    for (i, j), w in graph.edges.items():
        nbrs[i][j] = nbrs[i].get(j, 0.0) + w
        nbrs[j][i] = nbrs[j].get(i, 0.0) + w
    self_w = [0.0] * graph.n
    membership = np.arange(graph.n)

    while True:
        comm, moved = _local_move(nbrs, self_w, m, gamma, rng)
        if not moved:
            break
        # membership maps original node -> current-level node; new_comm maps
        # current-level node -> aggregated node, so compose them.
        nbrs, self_w, new_comm = _aggregate(nbrs, self_w, comm)
        membership = new_comm[membership]
        if len(nbrs) <= 1:
            break
    return Partition.from_labels(membership)


def frontier(system: DemandSystem, sessions: list[Session], gammas, policy: PricePolicy,
             metric: Metric, p: int, seed: int, workers: int = 1,
             exposure_draws: int = 32) -> list[FrontierPoint]:
    """Bias/variance/exposure trade-off across clustering resolutions.

    Per gamma: cluster the co-view graph, average the exposure share over
    ``exposure_draws`` cluster-level assignments, and Monte-Carlo the bias of
    cluster-randomizing on the inferred partition. Rows are sorted by gamma.
    """
    graph = build_graph(sessions, n=system.n)
    points = []
    for idx, gamma in sorted(enumerate(gammas), key=lambda t: t[1]):
        part = louvain(graph, gamma, seed)
        q = modularity(graph, part, gamma)
        k = part.n_clusters
        if k < 2:
            points.append(FrontierPoint(
                resolution=float(gamma), n_clusters=k,
                avg_cluster_size=system.n / k, modularity=q,
                share_both=float("nan"), share_both_sd=float("nan"),
                mean_bias=float("nan"), relative_sd=float("nan"), defined=False))
            continue
        strategy = ClusterLevel(part)
        shares = []
        for d in range(exposure_draws):
            rng = np.random.default_rng([seed, idx, 1, d])
            shares.append(exposure_share(sessions, assign(strategy, system.n, rng)).share_both)
        shares = np.asarray(shares)
        report: BiasReport = monte_carlo_bias(system, strategy, policy, metric, p,
                                              master_seed=[seed, idx, 2], workers=workers)
        points.append(FrontierPoint(
            resolution=float(gamma),
            n_clusters=k,
            avg_cluster_size=system.n / k,
            modularity=q,
            share_both=float(shares.mean()),
            share_both_sd=float(shares.std(ddof=1)) if shares.size > 1 else 0.0,
            mean_bias=report.mean_bias,
            relative_sd=report.relative_sd,
        ))
    return points
