"""Linear fusion of geometry and texture similarity into one quality index.

CM = alpha * q_g + (1 - alpha) * q_t, with both inputs and the output in
[0, 1] (1 = indistinguishable from the reference). The weight is fitted
by leave-one-model-out cross-validation: an exhaustive grid over alpha
maximizes the mean per-model Spearman correlation between CM and the
subjective scores of the training models, breaking ties toward the
smaller alpha.

The geometry side is pluggable: the in-repo curvature metric supplies
q_g directly, or externally computed scores are ingested from CSV score
files (columns model, stimulus, q_g, q_t, subjective).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .benchmark import spearman

ALPHA_GRID_STEP = 0.001


@dataclass(frozen=True)
class QualityPair:
    """Geometry and texture similarity for one distorted stimulus."""

    q_g: float
    q_t: float
    source_model: str = ""
    stimulus: str = ""

    def __post_init__(self):
        if not (0.0 <= self.q_g <= 1.0 and 0.0 <= self.q_t <= 1.0):
            raise ValueError(
                f"similarities must be in [0, 1], got q_g={self.q_g}, q_t={self.q_t}"
            )


@dataclass(frozen=True)
class AlphaFit:
    """Fitted fusion weight for one held-out model."""

    alpha: float
    heldout_model: str
    training_spearman: float


def combine(pair: QualityPair, alpha: float) -> float:
    """Fused similarity alpha * q_g + (1 - alpha) * q_t."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return alpha * pair.q_g + (1.0 - alpha) * pair.q_t


def alpha_grid() -> np.ndarray:
    n = int(round(1.0 / ALPHA_GRID_STEP))
    return np.round(np.linspace(0.0, 1.0, n + 1), 3)


def _grid_spearman(q_g: np.ndarray, q_t: np.ndarray, subj: np.ndarray) -> np.ndarray:
    """Spearman between CM(alpha) and subjective for every grid alpha at once.

    Equivalent to per-alpha spearman with average ranks; a grid point whose
    fused values are constant across stimuli contributes 0.
    """
    from scipy.stats import rankdata

    grid = alpha_grid()
    cm = grid[:, None] * q_g[None, :] + (1.0 - grid[:, None]) * q_t[None, :]
    ranks = rankdata(cm, axis=1)
    ranks -= ranks.mean(axis=1, keepdims=True)
    y = rankdata(subj).astype(np.float64)
    y -= y.mean()
    y_norm = np.linalg.norm(y)
    norms = np.linalg.norm(ranks, axis=1)
    if y_norm == 0:
        return np.zeros(len(grid))
    out = np.zeros(len(grid))
    ok = norms > 0
    out[ok] = (ranks[ok] @ y) / (norms[ok] * y_norm)
    return out


def fit_alpha(
    dataset: list[tuple[QualityPair, float]], heldout_model: str
) -> AlphaFit:
    """Grid-search the fusion weight on all models except the held-out one."""
    groups: dict[str, list[tuple[float, float, float]]] = {}
    for pair, subjective in dataset:
        if pair.source_model == heldout_model:
            continue
        groups.setdefault(pair.source_model, []).append((pair.q_g, pair.q_t, subjective))

    if len(groups) < 2:
        raise ValueError(
            f"need at least 2 training models besides {heldout_model!r}, got {len(groups)}"
        )
    objective = np.zeros(len(alpha_grid()))
    for model, rows in groups.items():
        if len(rows) < 3:
            raise ValueError(f"training model {model!r} has fewer than 3 stimuli")
        cols = np.array(rows, dtype=np.float64)
        objective += _grid_spearman(cols[:, 0], cols[:, 1], cols[:, 2])
    objective /= len(groups)

    best = int(np.argmax(objective))  # first maximum: ties break toward smaller alpha
    return AlphaFit(
        alpha=float(alpha_grid()[best]),
        heldout_model=heldout_model,
        training_spearman=float(objective[best]),
    )


def fit_alpha_leave_one_out(dataset: list[tuple[QualityPair, float]]) -> list[AlphaFit]:
    """One AlphaFit per model present in the dataset, holding it out."""
    models = list(dict.fromkeys(pair.source_model for pair, _ in dataset))
    return [fit_alpha(dataset, m) for m in models]


def read_score_file(path) -> list[tuple[QualityPair, float]]:
    """Load a score CSV with header model,stimulus,q_g,q_t,subjective."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"model", "stimulus", "q_g", "q_t", "subjective"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            pair = QualityPair(
                q_g=float(row["q_g"]),
                q_t=float(row["q_t"]),
                source_model=row["model"],
                stimulus=row["stimulus"],
            )
            rows.append((pair, float(row["subjective"])))
    return rows


def write_score_file(path, dataset: list[tuple[QualityPair, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "stimulus", "q_g", "q_t", "subjective"])
        for pair, subjective in dataset:
            writer.writerow(
                [
                    pair.source_model,
                    pair.stimulus,
                    repr(float(pair.q_g)),
                    repr(float(pair.q_t)),
                    repr(float(subjective)),
                ]
            )
