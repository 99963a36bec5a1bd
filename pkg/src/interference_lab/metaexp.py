"""Meta-experiment analytics.

A meta-experiment runs the same treatment twice, once cluster-randomized and
once article-randomized. The clustered estimate is treated as the less
biased reference; the discrepancy is expressed as relative bias and as a
distance in standard errors derived from the clustered arm's confidence
half-width.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

DEFAULT_CI_DIVISOR = 1.96  # +/- half-width read as a 95% confidence interval


@dataclass(frozen=True)
class MetaExperimentInput:
    label: str
    est_clustered: float
    ci_halfwidth: float
    est_article: float

    def __post_init__(self):
        if self.ci_halfwidth <= 0:
            raise ValueError("ci_halfwidth must be > 0")


@dataclass(frozen=True)
class MetaComparison:
    relative_bias: float
    sigma_distance: float


def compare(inp: MetaExperimentInput,
            ci_divisor: float = DEFAULT_CI_DIVISOR) -> MetaComparison:
    """Relative bias and sigma-distance of the article-based estimate.

    sigma is ci_halfwidth / ci_divisor; the divisor is configurable because
    a reported "+/- x pts" may be a standard error rather than a 95% CI.
    """
    if ci_divisor <= 0:
        raise ValueError("ci_divisor must be > 0")
    if inp.est_clustered == 0:
        raise ValueError(f"{inp.label}: relative bias undefined for a zero "
                         "clustered estimate")
    diff = inp.est_article - inp.est_clustered
    return MetaComparison(
        relative_bias=diff / inp.est_clustered,
        sigma_distance=diff / (inp.ci_halfwidth / ci_divisor),
    )


def read_inputs(path) -> list[MetaExperimentInput]:
    """Read `label,est_clustered,ci_halfwidth,est_article` rows."""
    expected = ["label", "est_clustered", "ci_halfwidth", "est_article"]
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expected:
            raise ValueError(f"{path}: expected header {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}: malformed row at line {lineno}")
            try:
                rows.append(MetaExperimentInput(row[0], float(row[1]),
                                                float(row[2]), float(row[3])))
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return rows
