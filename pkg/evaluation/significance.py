"""
Friedman rank test with the Nemenyi critical difference for comparing
aggregation methods across experiments.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from utils.exceptions import AnalysisError

# Nemenyi q_alpha (studentized range / sqrt(2)) for k = 2..10 methods
NEMENYI_Q: dict[float, tuple[float, ...]] = {
    0.05: (1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164),
    0.10: (1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920),
}


def nemenyi_q(num_methods: int, alpha: float) -> float:
    """Tabulated q_alpha for ``num_methods`` in [2, 10]."""
    table = NEMENYI_Q.get(round(alpha, 4))
    if table is None:
        raise AnalysisError(f"no Nemenyi table for alpha={alpha}; supported: {sorted(NEMENYI_Q)}")
    if not 2 <= num_methods <= len(table) + 1:
        raise AnalysisError(f"Nemenyi table covers 2..{len(table) + 1} methods, got {num_methods}")
    return table[num_methods - 2]


@dataclass
class ResultMatrix:
    """Rows are experiments (dataset x attack x delta), columns are methods; higher is better."""

    values: np.ndarray
    experiments: list[str]
    methods: list[str]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise AnalysisError(f"result matrix must be 2-D, got shape {self.values.shape}")
        if self.values.shape != (len(self.experiments), len(self.methods)):
            raise AnalysisError(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.experiments)} experiments x {len(self.methods)} methods"
            )
        if not np.all(np.isfinite(self.values)):
            raise AnalysisError("result matrix has missing or non-finite entries")

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "ResultMatrix":
        """Build from a DataFrame indexed by experiment with one column per method."""
        if frame.isna().any().any():
            missing = [str(idx) for idx, row in frame.iterrows() if row.isna().any()]
            raise AnalysisError(f"experiments missing a method score: {missing}")
        return cls(frame.to_numpy(dtype=np.float64), [str(i) for i in frame.index], [str(c) for c in frame.columns])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.experiments, columns=self.methods)


@dataclass
class FriedmanResult:
    """Test statistic, ranks and the methods that are not significantly different."""

    statistic: float
    p_value: float
    avg_ranks: dict[str, float]
    critical_difference: float
    groups: list[list[str]]
    alpha: float
    num_experiments: int
    row_ranks: np.ndarray = field(repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "num_experiments": self.num_experiments,
            "num_methods": len(self.avg_ranks),
            "critical_difference": self.critical_difference,
            "avg_ranks": self.avg_ranks,
            "groups": self.groups,
        }


def rank_rows(values: np.ndarray) -> np.ndarray:
    """Per-row ranks, 1 = best (highest value), ties share the average rank."""
    return np.vstack([stats.rankdata(-row, method="average") for row in values])


def cd_groups(methods: Sequence[str], avg_ranks: np.ndarray, critical_difference: float) -> list[list[str]]:
    """
    Maximal runs of rank-sorted methods whose rank spread is below the critical difference.

    Returns:
        Groups of two or more methods, best-ranked first
    """
    order = np.argsort(avg_ranks, kind="stable")
    ranks = avg_ranks[order]
    groups: list[list[str]] = []
    furthest = -1
    for start in range(len(order)):
        end = start
        while end + 1 < len(order) and ranks[end + 1] - ranks[start] < critical_difference:
            end += 1
        if end > start and end > furthest:
            groups.append([methods[i] for i in order[start:end + 1]])
            furthest = end
    return groups


def friedman_test(m: ResultMatrix, alpha: float = 0.05) -> FriedmanResult:
    """
    Friedman chi-square test over method ranks with the Nemenyi critical difference.

    Args:
        m: Result matrix (higher is better)
        alpha: Significance level (0.05 or 0.10)

    Returns:
        FriedmanResult

    Raises:
        AnalysisError: fewer than 2 methods or experiments, or an untabulated alpha
    """
    n, k = m.values.shape
    if k < 2 or n < 2:
        raise AnalysisError(f"friedman test needs >= 2 methods and >= 2 experiments, got {k} x {n}")
    q_alpha = nemenyi_q(k, alpha)

    ranks = rank_rows(m.values)
    avg = ranks.mean(axis=0)
    statistic = (12.0 * n / (k * (k + 1))) * (float(np.sum(avg ** 2)) - k * (k + 1) ** 2 / 4.0)
    statistic = max(statistic, 0.0)
    critical_difference = q_alpha * math.sqrt(k * (k + 1) / (6.0 * n))

    return FriedmanResult(
        statistic=statistic,
        p_value=float(stats.chi2.sf(statistic, k - 1)),
        avg_ranks={method: float(r) for method, r in zip(m.methods, avg)},
        critical_difference=critical_difference,
        groups=cd_groups(m.methods, avg, critical_difference),
        alpha=alpha,
        num_experiments=n,
        row_ranks=ranks,
    )
