"""Browsing sessions, the co-view article graph, and exposure metrics.

A session is a set of distinct viewed articles. The co-view graph connects
two articles with weight equal to the number of sessions that contained both.
Exposure classifies each session by the treatment labels it saw; the share of
sessions seeing both arms is the interference heuristic used to judge a
clustering.
"""

from __future__ import annotations

import csv
import itertools
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .demand import Partition
from .experiment import Assignment

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Session:
    session_id: str
    viewed: frozenset[int]

    def __post_init__(self):
        if not self.viewed:
            raise ValueError("a session must view at least one article")


@dataclass(frozen=True)
class SessionGraph:
    """Weighted undirected co-view graph; keys are (i, j) with i < j."""

    n: int
    edges: dict[tuple[int, int], int]

    def __post_init__(self):
        for (i, j), w in self.edges.items():
            if i == j:
                raise ValueError("self-loops are not allowed")
            if not 0 <= i < j < self.n:
                raise ValueError(f"edge ({i},{j}) out of range or unordered")
            if w < 1:
                raise ValueError("edge weights must be >= 1")

    @property
    def total_weight(self) -> float:
        return float(sum(self.edges.values()))

    def strengths(self) -> np.ndarray:
        """Weighted degree per node."""
        d = np.zeros(self.n)
        for (i, j), w in self.edges.items():
            d[i] += w
            d[j] += w
        return d


@dataclass(frozen=True)
class ExposureReport:
    share_both: float
    share_treated_only: float
    share_control_only: float
    session_count: int


def generate_sessions(partition: Partition, n_sessions: int, views_min: int,
                      views_max: int, purity: float, seed: int) -> list[Session]:
    """Synthesize sessions with a home cluster and a purity knob.

    Each session picks a home cluster uniformly; each of its k ~
    uniform[views_min, views_max] views stays in the home cluster with
    probability ``purity`` and otherwise lands uniformly on any article.
    Views are deduplicated within the session.
    """
    if n_sessions < 1:
        raise ValueError("n_sessions must be >= 1")
    if views_min < 1 or views_max < views_min:
        raise ValueError("view bounds must satisfy 1 <= min <= max")
    if not 0 <= purity <= 1:
        raise ValueError("purity must lie in [0, 1]")

    rng = np.random.default_rng(seed)
    n = partition.n
    k = partition.n_clusters
    members = np.argsort(partition.cluster_of, kind="stable")
    sizes = partition.sizes()
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])

    counts = rng.integers(views_min, views_max + 1, n_sessions)
    total = int(counts.sum())
    home = np.repeat(rng.integers(0, k, n_sessions), counts)
    stay = rng.random(total) < purity
    in_cluster = offsets[home] + (rng.random(total) * sizes[home]).astype(np.int64)
    anywhere = rng.integers(0, n, total)
    views = np.where(stay, members[in_cluster], anywhere)

    sessions = []
    start = 0
    for i, c in enumerate(counts):
        viewed = frozenset(int(v) for v in views[start:start + c])
        sessions.append(Session(session_id=f"s{i}", viewed=viewed))
        start += c
    return sessions


def read_sessions(path, n_articles: int | None = None) -> list[Session]:
    """Read sessions from a CSV with header ``session_id,article_id``.

    Rows with the same session_id aggregate into one deduplicated session;
    session order follows first appearance. Malformed rows and out-of-range
    article ids raise with the offending line number.
    """
    path = Path(path)
    grouped: dict[str, set[int]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            logger.warning("empty clickstream file %s", path)
            return []
        if [h.strip() for h in header] != ["session_id", "article_id"]:
            raise ValueError(f"{path}: expected header 'session_id,article_id'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: malformed row at line {lineno}")
            sid, raw = row
            try:
                article = int(raw)
            except ValueError:
                raise ValueError(
                    f"{path}: non-integer article_id at line {lineno}"
                ) from None
            if article < 0 or (n_articles is not None and article >= n_articles):
                raise ValueError(f"{path}: unknown article id {article} at line {lineno}")
            grouped.setdefault(sid, set()).add(article)
    if not grouped:
        logger.warning("clickstream file %s contains no rows", path)
    return [Session(sid, frozenset(v)) for sid, v in grouped.items()]


def write_sessions(sessions: list[Session], path) -> None:
    """Write sessions in the clickstream CSV format (sorted article ids per session)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["session_id", "article_id"])
        for s in sessions:
            for a in sorted(s.viewed):
                writer.writerow([s.session_id, a])


def build_graph(sessions: list[Session], n: int | None = None) -> SessionGraph:
    """Co-view graph: each session adds weight 1 to every pair it viewed."""
    if not sessions:
        raise ValueError("sessions must be non-empty")
    max_seen = max(max(s.viewed) for s in sessions)
    if n is None:
        n = max_seen + 1
    elif max_seen >= n:
        raise ValueError("session views exceed the declared article count")
    weights: Counter[tuple[int, int]] = Counter()
    for s in sessions:
        for i, j in itertools.combinations(sorted(s.viewed), 2):
            weights[(i, j)] += 1
    return SessionGraph(n=n, edges=dict(weights))


def exposure_share(sessions: list[Session], assignment: Assignment) -> ExposureReport:
    """Classify each session by the set of treatment labels it saw."""
    if not sessions:
        raise ValueError("sessions must be non-empty")
    treated = assignment.treated
    both = t_only = c_only = 0
    for s in sessions:
        for a in s.viewed:
            if a < 0 or a >= assignment.n:
                raise ValueError(f"session {s.session_id}: article {a} not covered "
                                 "by the assignment")
        labels = {bool(treated[a]) for a in s.viewed}
        if len(labels) == 2:
            both += 1
        elif True in labels:
            t_only += 1
        else:
            c_only += 1
    count = len(sessions)
    return ExposureReport(
        share_both=both / count,
        share_treated_only=t_only / count,
        share_control_only=c_only / count,
        session_count=count,
    )
