"""Demand systems with clustered cross-price elasticities.

Demand is constant-elasticity (log-linear): under a price-multiplier vector
mu, article i sells q_i = q0_i * prod_j mu_j ** E_ij. The elasticity matrix E
is near-block-diagonal: negative own-price elasticities on the diagonal, a
per-cluster substitution coefficient off-diagonal within clusters, and a
small nonnegative background coefficient between clusters. Every
counterfactual, including the global treatment effect of a full roll-out, is
therefore computable exactly.

The structured representation (own vector, per-cluster beta, scalar
background) evaluates in O(n); ``dense_oracle`` materializes E and serves as
a brute-force cross-check.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

DENSE_ORACLE_MAX_N = 2000


class Metric(Enum):
    UNITS = "units"
    REVENUE = "revenue"


@dataclass(frozen=True)
class Partition:
    """Maps each article index to a cluster id (dense, 0-based on both sides)."""

    cluster_of: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.cluster_of, dtype=np.int64)
        object.__setattr__(self, "cluster_of", labels)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("partition must be a non-empty 1-d label array")
        if labels.min() < 0:
            raise ValueError("cluster ids must be non-negative")
        k = int(labels.max()) + 1
        counts = np.bincount(labels, minlength=k)
        if (counts == 0).any():
            raise ValueError("cluster ids must be contiguous with no empty cluster")

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Build a Partition from arbitrary labels, relabeled contiguously.

        New ids follow first appearance by article index, so the result is
        deterministic for a given label vector.
        """
        labels = np.asarray(labels)
        _, inverse = np.unique(labels, return_inverse=True)
        # np.unique sorts values; remap so ids follow first appearance.
        order = np.zeros(inverse.max() + 1, dtype=np.int64)
        seen = {}
        for lab in inverse:
            if lab not in seen:
                seen[lab] = len(seen)
        for lab, new in seen.items():
            order[lab] = new
        return cls(order[inverse])

    @property
    def n(self) -> int:
        return int(self.cluster_of.size)

    @property
    def n_clusters(self) -> int:
        return int(self.cluster_of.max()) + 1

    def sizes(self) -> np.ndarray:
        return np.bincount(self.cluster_of, minlength=self.n_clusters)


@dataclass(frozen=True)
class ElasticityStructure:
    """Structured near-block-diagonal elasticity matrix.

    ``own[i]`` is article i's own-price elasticity (strictly negative),
    ``within[c]`` the cross-price elasticity between any two distinct
    articles of cluster c, and ``background`` the cross-price elasticity
    between articles of different clusters.
    """

    own: np.ndarray
    within: np.ndarray
    background: float
    partition: Partition

    def __post_init__(self):
        own = np.asarray(self.own, dtype=float)
        within = np.asarray(self.within, dtype=float)
        object.__setattr__(self, "own", own)
        object.__setattr__(self, "within", within)
        n, k = self.partition.n, self.partition.n_clusters
        if own.shape != (n,):
            raise ValueError(f"own must have shape ({n},)")
        if within.shape != (k,):
            raise ValueError(f"within must have shape ({k},)")
        if not (own < 0).all():
            raise ValueError("own-price elasticities must be strictly negative")
        if self.background < 0:
            raise ValueError("background elasticity must be >= 0")
        sizes = self.partition.sizes()
        multi = sizes > 1
        if (within < 0).any():
            raise ValueError("within-cluster elasticities must be >= 0")
        # Sharp differentiation: within-cluster substitution dominates the
        # background. A zero beta on a multi-article cluster is only
        # meaningful in fully interference-free systems (background == 0).
        if self.background > 0 and (within[multi] < self.background).any():
            raise ValueError("within-cluster elasticity must be >= background")

    @property
    def n(self) -> int:
        return self.partition.n

    def dense_matrix(self) -> np.ndarray:
        """Materialize the full n x n elasticity matrix (small n only)."""
        n = self.n
        if n > DENSE_ORACLE_MAX_N:
            raise ValueError(
                f"dense matrix limited to n <= {DENSE_ORACLE_MAX_N}, got n={n}"
            )
        c = self.partition.cluster_of
        same = c[:, None] == c[None, :]
        e = np.where(same, self.within[c][:, None], self.background)
        np.fill_diagonal(e, self.own)
        return e


@dataclass(frozen=True)
class DemandSystem:
    """Base prices/quantities plus the elasticity structure; the counterfactual oracle."""

    base_prices: np.ndarray
    base_quantities: np.ndarray
    elasticity: ElasticityStructure
    seed: int | None = None
    config: "GeneratorConfig | None" = None

    def __post_init__(self):
        p = np.asarray(self.base_prices, dtype=float)
        q = np.asarray(self.base_quantities, dtype=float)
        object.__setattr__(self, "base_prices", p)
        object.__setattr__(self, "base_quantities", q)
        n = self.elasticity.n
        if p.shape != (n,) or q.shape != (n,):
            raise ValueError("base prices/quantities must match article count")
        if not (p > 0).all() or not (q > 0).all():
            raise ValueError("base prices and quantities must be strictly positive")

    @property
    def n(self) -> int:
        return self.elasticity.n

    @property
    def partition(self) -> Partition:
        return self.elasticity.partition

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "config": asdict(self.config) if self.config is not None else None,
            "own": self.elasticity.own.tolist(),
            "partition": self.elasticity.partition.cluster_of.tolist(),
            "within_beta": self.elasticity.within.tolist(),
            "background": self.elasticity.background,
            "base_prices": self.base_prices.tolist(),
            "base_quantities": self.base_quantities.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DemandSystem":
        partition = Partition(np.asarray(d["partition"], dtype=np.int64))
        elasticity = ElasticityStructure(
            own=np.asarray(d["own"], dtype=float),
            within=np.asarray(d["within_beta"], dtype=float),
            background=float(d["background"]),
            partition=partition,
        )
        config = GeneratorConfig(**d["config"]) if d.get("config") else None
        return cls(
            base_prices=np.asarray(d["base_prices"], dtype=float),
            base_quantities=np.asarray(d["base_quantities"], dtype=float),
            elasticity=elasticity,
            seed=d.get("seed"),
            config=config,
        )

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path) -> "DemandSystem":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class PricePolicy:
    """Uniform price multiplier applied to treated articles (controls keep 1)."""

    treated_multiplier: float = 0.95

    def __post_init__(self):
        if self.treated_multiplier <= 0:
            raise ValueError("treated multiplier must be > 0")


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for synthetic demand systems.

    ``within_share`` (phi) sets the total within-cluster substitution mass
    received by an article as a fraction of |own_mean|; ``background_share``
    does the same for the cross-cluster background. Default magnitudes are
    design choices, not measured values.
    """

    n: int = 10_000
    cluster_size_min: int = 2
    cluster_size_max: int = 20
    own_mean: float = -2.5
    own_spread: float = 0.5
    within_share: float = 0.3
    background_share: float = 0.05
    price_min: float = 10.0
    price_max: float = 100.0
    quantity_min: float = 10.0
    quantity_max: float = 100.0

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.cluster_size_min < 1 or self.cluster_size_max < self.cluster_size_min:
            raise ValueError("cluster sizes must satisfy 1 <= min <= max")
        if self.own_mean + self.own_spread >= 0:
            raise ValueError("own_mean + own_spread must stay negative")
        if self.own_spread < 0:
            raise ValueError("own_spread must be >= 0")
        if not (0 <= self.within_share < 1) or not (0 <= self.background_share < 1):
            raise ValueError("shares must lie in [0, 1)")
        if self.within_share + self.background_share >= 1:
            raise ValueError("within_share + background_share must be < 1")
        if self.price_min <= 0 or self.price_max < self.price_min:
            raise ValueError("price range must satisfy 0 < min <= max")
        if self.quantity_min <= 0 or self.quantity_max < self.quantity_min:
            raise ValueError("quantity range must satisfy 0 < min <= max")


def generate_demand_system(config: GeneratorConfig, seed: int) -> DemandSystem:
    """Draw a demand system deterministically from (config, seed).

    Cluster sizes are uniform integers in [min, max], the last cluster
    truncated to fit n. Per-cluster beta is within_share * |own_mean| /
    (size - 1) so an article's total within-cluster substitution mass is
    size-invariant; singleton clusters get beta = 0.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    n = config.n

    sizes = []
    total = 0
    while total < n:
        s = int(rng.integers(config.cluster_size_min, config.cluster_size_max + 1))
        s = min(s, n - total)
        sizes.append(s)
        total += s
    sizes = np.asarray(sizes, dtype=np.int64)
    partition = Partition(np.repeat(np.arange(sizes.size), sizes))

    own = rng.uniform(config.own_mean - config.own_spread,
                      config.own_mean + config.own_spread, n)
    mass = abs(config.own_mean)
    within = np.where(sizes > 1, config.within_share * mass / np.maximum(sizes - 1, 1), 0.0)
    background = config.background_share * mass / n

    elasticity = ElasticityStructure(own=own, within=within,
                                     background=background, partition=partition)
    prices = rng.uniform(config.price_min, config.price_max, n)
    quantities = rng.uniform(config.quantity_min, config.quantity_max, n)
    return DemandSystem(base_prices=prices, base_quantities=quantities,
                        elasticity=elasticity, seed=seed, config=config)


def _check_multipliers(system: DemandSystem, multipliers) -> np.ndarray:
    mu = np.asarray(multipliers, dtype=float)
    if mu.shape != (system.n,):
        raise ValueError(f"multipliers must have shape ({system.n},)")
    if not (mu > 0).all():
        raise ValueError("all price multipliers must be > 0")
    return mu


def demand_at(system: DemandSystem, multipliers) -> np.ndarray:
    """Quantities under a multiplier vector, in O(n) via per-cluster log-sums."""
    mu = _check_multipliers(system, multipliers)
    e = system.elasticity
    c = e.partition.cluster_of
    logs = np.log(mu)
    cluster_logsum = np.bincount(c, weights=logs, minlength=e.partition.n_clusters)
    total_logsum = logs.sum()
    exponent = (
        e.own * logs
        + e.within[c] * (cluster_logsum[c] - logs)
        + e.background * (total_logsum - cluster_logsum[c])
    )
    return system.base_quantities * np.exp(exponent)


def dense_oracle(system: DemandSystem, multipliers) -> np.ndarray:
    """Brute-force demand via the materialized elasticity matrix (n <= 2000)."""
    if system.n > DENSE_ORACLE_MAX_N:
        raise ValueError(
            f"dense_oracle is limited to n <= {DENSE_ORACLE_MAX_N}, got n={system.n}"
        )
    mu = _check_multipliers(system, multipliers)
    e = system.elasticity.dense_matrix()
    return system.base_quantities * np.exp(e @ np.log(mu))


def metric_values(system: DemandSystem, multipliers, quantities, metric: Metric) -> np.ndarray:
    """Per-article outcome values for realized quantities under ``multipliers``."""
    if metric is Metric.UNITS:
        return np.asarray(quantities, dtype=float)
    return np.asarray(multipliers, dtype=float) * system.base_prices * quantities


def base_metric_values(system: DemandSystem, metric: Metric) -> np.ndarray:
    """Per-article outcome values at base prices and quantities."""
    if metric is Metric.UNITS:
        return system.base_quantities
    return system.base_prices * system.base_quantities


def outcome(system: DemandSystem, multipliers, metric: Metric, subset=None) -> float:
    """Aggregate Units or Revenue over a subset of articles (default: all)."""
    mu = _check_multipliers(system, multipliers)
    if subset is None:
        idx = np.arange(system.n)
    else:
        idx = np.asarray(sorted(subset), dtype=np.int64)
        if idx.size == 0:
            raise ValueError("subset must be non-empty")
        if idx.min() < 0 or idx.max() >= system.n:
            raise ValueError("subset indices out of range")
    q = demand_at(system, mu)
    return float(metric_values(system, mu, q, metric)[idx].sum())


def global_treatment_effect(system: DemandSystem, policy: PricePolicy,
                            metric: Metric) -> float:
    """Relative lift of rolling the policy out to every article."""
    mu = np.full(system.n, policy.treated_multiplier)
    ones = np.ones(system.n)
    return outcome(system, mu, metric) / outcome(system, ones, metric) - 1.0
