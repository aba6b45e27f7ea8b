"""Correlation benchmarking of objective metrics against subjective scores.

Per reference model, the benchmark reports the Spearman rank correlation
of the raw metric, and the Pearson correlation and residual RMSE after a
monotone four-parameter logistic mapping from metric values to the
subjective scale. A cross-model average row summarizes each table.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats
from scipy.special import expit


def _as_series(x, y, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("series must be 1-D and of equal length")
    if len(x) < min_len:
        raise ValueError(f"series must have at least {min_len} points, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("series must be finite")
    return x, y


def spearman(x, y) -> float:
    """Rank correlation with average ranks for ties."""
    x, y = _as_series(x, y, 3)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("correlation undefined for a constant series")
    rho = stats.spearmanr(x, y).statistic
    return float(rho)


def pearson(x, y) -> float:
    """Product-moment correlation."""
    x, y = _as_series(x, y, 3)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("correlation undefined for a constant series")
    return float(stats.pearsonr(x, y).statistic)


@dataclass(frozen=True)
class LogisticFit:
    """Monotone mapping q -> b1 + b2 / (1 + exp(-(q - b3) / b4))."""

    b1: float
    b2: float
    b3: float
    b4: float
    residual_rmse: float

    def __call__(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            t = (q - self.b3) / self.b4 if self.b4 != 0 else np.sign(q - self.b3) * np.inf
            return self.b1 + self.b2 * expit(t)


def _logistic_sse(params: np.ndarray, q: np.ndarray, s: np.ndarray) -> float:
    b1, b2, b3, b4 = params
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        t = (q - b3) / b4 if b4 != 0 else np.sign(q - b3) * np.inf
        pred = b1 + b2 * expit(t)
    err = pred - s
    return float(err @ err)


_NM_OPTIONS = dict(maxiter=20000, maxfev=20000, xatol=1e-12, fatol=1e-14)


def logistic_fit(objective, subjective) -> LogisticFit:
    """Least-squares four-parameter logistic via simplex descent.

    Starts from a deterministic initialization and retries with the slope
    scale halved, doubled and sign-flipped. When the data is nearly linear
    the optimum lies far along a valley of ever-steeper curves, so the
    best fit is refined by restarts that quadruple b4 while preserving
    the implied line (b2 and b1 adjust along), until no restart improves.
    """
    q, s = _as_series(objective, subjective, 5)
    if np.ptp(q) == 0:
        raise ValueError("objective series is constant; logistic fit undefined")

    b1 = float(s.min())
    b2 = float(s.max() - s.min())
    b3 = float(np.median(q))
    b4 = float(q.std() / 4.0) or 1.0

    def descend(x0):
        return optimize.minimize(
            _logistic_sse, x0, args=(q, s), method="Nelder-Mead", options=_NM_OPTIONS
        )

    best = None
    for scale in (1.0, 0.5, 2.0, -1.0):
        res = descend(np.array([b1, b2, b3, b4 * scale]))
        if best is None or res.fun < best.fun:
            best = res
    # line-anchored starts far along the steep-curve valley: for nearly
    # linear data the optimum has a huge slope scale, where the curve's
    # bend is negligible but float cancellation in b1 + b2*expit grows
    # with b2; these b4 choices keep both error terms tiny
    slope, intercept = np.polyfit(q, s, 1)
    spread = float(q.std()) or 1.0
    for big in (5e3 * spread, 5e4 * spread):
        amp = 4.0 * big * slope
        x0 = np.array([intercept + slope * b3 - amp / 2.0, amp, b3, big])
        res = descend(x0)
        if res.fun < best.fun:
            best = res
    for _ in range(8):
        c1, c2, c3, c4 = best.x
        steeper = np.array([c1 - 1.5 * c2, 4.0 * c2, c3, 4.0 * c4])
        improved = False
        for start in (steeper, best.x):
            res = descend(start)
            if res.fun < best.fun * (1.0 - 1e-12):
                best, improved = res, True
        if not improved:
            break
    rmse = float(np.sqrt(best.fun / len(q)))
    return LogisticFit(*map(float, best.x), residual_rmse=rmse)


@dataclass(frozen=True)
class MetricSeries:
    """Per-stimulus metric values paired with subjective scores."""

    model: tuple[str, ...]
    stimulus: tuple[str, ...]
    objective: np.ndarray
    subjective: np.ndarray

    def __post_init__(self):
        obj = np.asarray(self.objective, dtype=np.float64)
        subj = np.asarray(self.subjective, dtype=np.float64)
        n = len(self.model)
        if not (len(self.stimulus) == len(obj) == len(subj) == n):
            raise ValueError("all series columns must have equal length")
        if not (np.all(np.isfinite(obj)) and np.all(np.isfinite(subj))):
            raise ValueError("series values must be finite")
        obj.flags.writeable = False
        subj.flags.writeable = False
        object.__setattr__(self, "model", tuple(self.model))
        object.__setattr__(self, "stimulus", tuple(self.stimulus))
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "subjective", subj)

    def models(self) -> list[str]:
        seen = dict.fromkeys(self.model)
        return list(seen)

    def for_model(self, model: str) -> tuple[np.ndarray, np.ndarray]:
        mask = np.array([m == model for m in self.model])
        return self.objective[mask], self.subjective[mask]


@dataclass(frozen=True)
class ModelReport:
    model: str
    pearson_after_fit: float
    spearman_raw: float
    residual_rmse: float


@dataclass(frozen=True)
class BenchmarkReport:
    per_model: tuple[ModelReport, ...]

    @property
    def average(self) -> ModelReport:
        return ModelReport(
            model="Average",
            pearson_after_fit=float(np.mean([r.pearson_after_fit for r in self.per_model])),
            spearman_raw=float(np.mean([r.spearman_raw for r in self.per_model])),
            residual_rmse=float(np.mean([r.residual_rmse for r in self.per_model])),
        )

    def rows(self) -> list[ModelReport]:
        return [*self.per_model, self.average]


def evaluate_metric(series: MetricSeries) -> BenchmarkReport:
    """Per-model correlation report for one objective metric."""
    reports = []
    for model in series.models():
        obj, subj = series.for_model(model)
        if len(obj) < 3:
            raise ValueError(f"model {model!r} has fewer than 3 stimuli")
        r_s = spearman(obj, subj)
        if len(obj) >= 5:
            fit = logistic_fit(obj, subj)
            mapped = fit(obj)
        else:
            # not enough points to pin four parameters; fall back to a line
            slope, intercept = np.polyfit(obj, subj, 1)
            mapped = slope * obj + intercept
        if np.ptp(mapped) == 0:
            r_p = 0.0
        else:
            r_p = pearson(mapped, subj)
        rmse = float(np.sqrt(np.mean((mapped - subj) ** 2)))
        reports.append(
            ModelReport(
                model=model,
                pearson_after_fit=r_p,
                spearman_raw=r_s,
                residual_rmse=rmse,
            )
        )
    return BenchmarkReport(per_model=tuple(reports))


def report_to_csv(report: BenchmarkReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["model", "pearson", "spearman", "rmse"])
    for row in report.rows():
        writer.writerow(
            [row.model, f"{row.pearson_after_fit:.4f}", f"{row.spearman_raw:.4f}", f"{row.residual_rmse:.4f}"]
        )
    return out.getvalue()


def report_to_text(report: BenchmarkReport) -> str:
    rows = report.rows()
    name_w = max(len(r.model) for r in rows)
    lines = [f"{'model':<{name_w}}  {'r_p':>7}  {'r_s':>7}  {'RMSE':>7}"]
    for r in rows:
        lines.append(
            f"{r.model:<{name_w}}  {r.pearson_after_fit:>7.4f}  {r.spearman_raw:>7.4f}  {r.residual_rmse:>7.4f}"
        )
    return "\n".join(lines) + "\n"


def read_metric_series(path) -> MetricSeries:
    """Load a CSV with header model,stimulus,objective,subjective."""
    models, stimuli, obj, subj = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"model", "stimulus", "objective", "subjective"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            models.append(row["model"])
            stimuli.append(row["stimulus"])
            obj.append(float(row["objective"]))
            subj.append(float(row["subjective"]))
    return MetricSeries(
        model=tuple(models), stimulus=tuple(stimuli), objective=obj, subjective=subj
    )
