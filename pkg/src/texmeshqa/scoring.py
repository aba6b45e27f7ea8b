"""Scores and agreement statistics for paired-comparison studies.

A completed session yields a total quality ranking. Rankings expand into
pairwise preference counts by transitivity, votes normalized by subject
count give per-stimulus scores, Kendall's coefficient of concordance
measures how much the subjects agree, and inverse-normal scaling of the
choice proportions provides an interval-scale cross-check of the votes.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class PreferenceMatrix:
    """Pairwise vote counts: counts[i, j] = subjects preferring i over j."""

    stimuli: tuple[str, ...]
    counts: np.ndarray
    n_subjects: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        n = len(self.stimuli)
        if c.shape != (n, n):
            raise ValueError(f"counts must be {n}x{n}, got {c.shape}")
        if np.any(np.diag(c) != 0):
            raise ValueError("diagonal of a preference matrix must be zero")
        off = ~np.eye(n, dtype=bool)
        if np.any((c + c.T)[off] != self.n_subjects):
            raise ValueError("counts(i,j) + counts(j,i) must equal the subject count")
        c.flags.writeable = False
        object.__setattr__(self, "stimuli", tuple(self.stimuli))
        object.__setattr__(self, "counts", c)

    @property
    def n_stimuli(self) -> int:
        return len(self.stimuli)


@dataclass(frozen=True)
class SubjectiveScores:
    """Vote scores per stimulus, each in [0, n_stimuli - 1]."""

    stimuli: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.flags.writeable = False
        object.__setattr__(self, "stimuli", tuple(self.stimuli))
        object.__setattr__(self, "values", v)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.stimuli, self.values.tolist()))


@dataclass(frozen=True)
class ConcordanceResult:
    """Kendall's W with its chi-square p-value."""

    w: float
    p_value: float
    n_rankings: int
    n_items: int


def _check_rankings(rankings: list[list[str]]) -> tuple[str, ...]:
    if not rankings:
        raise ValueError("no rankings given")
    base = rankings[0]
    universe = sorted(base)
    for r in rankings:
        if sorted(r) != universe:
            raise ValueError("rankings must all permute the same stimulus set")
        if len(set(r)) != len(r):
            raise ValueError("rankings must not repeat stimuli")
    return tuple(base)


def preference_matrix(rankings: list[list[str]]) -> PreferenceMatrix:
    """Expand best-to-worst rankings into summed pairwise preference counts."""
    _check_rankings(rankings)
    stimuli = tuple(sorted(rankings[0]))
    index = {s: i for i, s in enumerate(stimuli)}
    n = len(stimuli)
    counts = np.zeros((n, n), dtype=np.int64)
    for ranking in rankings:
        order = [index[s] for s in ranking]
        for a in range(n):
            for b in range(a + 1, n):
                counts[order[a], order[b]] += 1
    return PreferenceMatrix(stimuli=stimuli, counts=counts, n_subjects=len(rankings))


def vote_scores(matrix: PreferenceMatrix) -> SubjectiveScores:
    """Row sums of the preference matrix divided by the subject count."""
    if matrix.n_subjects == 0:
        raise ValueError("subject count must be positive")
    s = matrix.counts.sum(axis=1) / matrix.n_subjects
    return SubjectiveScores(stimuli=matrix.stimuli, values=s)


def kendalls_w(rankings: list[list[str]]) -> ConcordanceResult:
    """Kendall's coefficient of concordance over complete untied rankings.

    W = 12 S / (n_s^2 (n_m^3 - n_m)) with S the squared deviation of item
    rank sums around their mean; the p-value uses the chi-square
    approximation with n_m - 1 degrees of freedom.
    """
    _check_rankings(rankings)
    n_s = len(rankings)
    n_m = len(rankings[0])
    if n_s < 2:
        raise ValueError("concordance needs at least 2 rankings")
    if n_m < 3:
        raise ValueError("concordance needs at least 3 items")

    stimuli = sorted(rankings[0])
    index = {s: i for i, s in enumerate(stimuli)}
    rank_sums = np.zeros(n_m)
    for ranking in rankings:
        for rank_pos, stim in enumerate(ranking, start=1):
            rank_sums[index[stim]] += rank_pos
    s = float(np.sum((rank_sums - rank_sums.mean()) ** 2))
    w = 12.0 * s / (n_s**2 * (n_m**3 - n_m))
    chi2 = n_s * (n_m - 1) * w
    p = float(stats.chi2.sf(chi2, df=n_m - 1))
    return ConcordanceResult(w=float(w), p_value=p, n_rankings=n_s, n_items=n_m)


def thurstone_case_v(matrix: PreferenceMatrix) -> SubjectiveScores:
    """Interval-scale values from choice proportions via the inverse normal.

    Proportions are clamped away from 0 and 1 by half a vote so the
    z-transform stays finite; each stimulus scores the mean of its row of
    z-values, shifted to zero mean. The self-comparison cell uses
    proportion one half (z = 0), which cancels in the shift.
    """
    n_s = matrix.n_subjects
    if n_s == 0:
        raise ValueError("subject count must be positive")
    n = matrix.n_stimuli
    p = matrix.counts.astype(np.float64) / n_s
    lo, hi = 1.0 / (2 * n_s), 1.0 - 1.0 / (2 * n_s)
    p = np.clip(p, lo, hi)
    np.fill_diagonal(p, 0.5)
    z = stats.norm.ppf(p)
    values = z.mean(axis=1)
    values -= values.mean()
    return SubjectiveScores(stimuli=matrix.stimuli, values=values)


def scores_to_csv(scores: SubjectiveScores) -> str:
    """Stimulus, rank (1 = best), score rows."""
    order = np.argsort(-scores.values, kind="stable")
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["stimulus", "rank", "score"])
    for rank, idx in enumerate(order, start=1):
        writer.writerow([scores.stimuli[idx], rank, repr(float(scores.values[idx]))])
    return out.getvalue()


def read_ranking_csv(path) -> list[str]:
    """Read one subject's ranking CSV (columns stimulus, rank; 1 = best)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"stimulus", "rank"}.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected columns stimulus, rank")
        for row in reader:
            rows.append((int(row["rank"]), row["stimulus"]))
    rows.sort()
    return [stim for _, stim in rows]
