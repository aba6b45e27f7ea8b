import numpy as np
import pytest
from scipy.special import expit

from texmeshqa.benchmark import (
    MetricSeries,
    evaluate_metric,
    logistic_fit,
    pearson,
    read_metric_series,
    report_to_csv,
    report_to_text,
    spearman,
)


class TestSpearman:
    def test_monotone_transform_gives_one(self):
        x = np.linspace(-2, 2, 15)
        for f in (np.exp, np.tanh, lambda v: v**3):
            assert spearman(x, f(x)) == pytest.approx(1.0)

    def test_reversal_gives_minus_one(self):
        x = np.arange(10.0)
        assert spearman(x, -x) == pytest.approx(-1.0)

    def test_hand_computed_case(self):
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)

    def test_matches_naive_rank_implementation(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.uniform(0, 1, 12)
            y = rng.uniform(0, 1, 12)
            rx = np.argsort(np.argsort(x)).astype(float)
            ry = np.argsort(np.argsort(y)).astype(float)
            naive = np.corrcoef(rx, ry)[0, 1]
            assert spearman(x, y) == pytest.approx(naive, abs=1e-12)

    def test_increasing_transform_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 1, 10)
        y = rng.uniform(0, 1, 10)
        base = spearman(x, y)
        assert spearman(np.exp(3 * x), y) == pytest.approx(base, abs=1e-12)
        assert spearman(x, y**3 + 5) == pytest.approx(base, abs=1e-12)

    def test_constant_series_errors(self):
        with pytest.raises(ValueError, match="constant"):
            spearman([1, 1, 1], [1, 2, 3])

    def test_short_series_errors(self):
        with pytest.raises(ValueError, match="at least 3"):
            spearman([1, 2], [3, 4])


class TestPearson:
    def test_affine_gives_one(self):
        x = np.arange(8.0)
        assert pearson(x, 2 * x + 1) == pytest.approx(1.0)

    def test_negative_scale(self):
        x = np.arange(8.0)
        assert pearson(x, -3 * x) == pytest.approx(-1.0)

    def test_hand_zero_case(self):
        assert pearson([0, 1, 2], [0, 1, 0]) == pytest.approx(0.0, abs=1e-12)

    def test_affine_equivariance(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 1, 9)
        y = rng.uniform(0, 1, 9)
        base = pearson(x, y)
        assert pearson(3 * x + 2, y) == pytest.approx(base, abs=1e-12)
        assert pearson(-2 * x, y) == pytest.approx(-base, abs=1e-12)


class TestLogisticFit:
    def test_generate_and_recover(self):
        rng = np.random.default_rng(3)
        q = np.sort(rng.uniform(-1, 1, 25))
        true = (2.0, 7.0, -0.1, 0.3)
        s = true[0] + true[1] * expit((q - true[2]) / true[3])
        fit = logistic_fit(q, s)
        assert fit.residual_rmse < 1e-6
        assert np.abs(fit(q) - s).max() < 1e-3

    def test_decreasing_relation_recovered(self):
        rng = np.random.default_rng(4)
        q = np.sort(rng.uniform(0, 1, 20))
        s = 5.0 - 3.0 * expit((q - 0.5) / 0.1)
        fit = logistic_fit(q, s)
        assert fit.residual_rmse < 1e-6

    def test_linear_data_fits_closely(self):
        q = np.linspace(0, 1, 15)
        fit = logistic_fit(q, q)
        assert np.abs(fit(q) - q).max() < 1e-3

    def test_noise_no_worse_than_constant(self):
        rng = np.random.default_rng(5)
        q = rng.uniform(0, 1, 5)
        s = rng.uniform(0, 1, 5)
        fit = logistic_fit(q, s)
        constant_rmse = float(np.sqrt(np.mean((s - s.mean()) ** 2)))
        assert fit.residual_rmse <= constant_rmse + 1e-9

    def test_constant_objective_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            logistic_fit([1, 1, 1, 1, 1], [1, 2, 3, 4, 5])

    def test_short_series_rejected(self):
        with pytest.raises(ValueError, match="at least 5"):
            logistic_fit([1, 2, 3, 4], [1, 2, 3, 4])


def series_from_rows(rows):
    return MetricSeries(
        model=tuple(r[0] for r in rows),
        stimulus=tuple(r[1] for r in rows),
        objective=[r[2] for r in rows],
        subjective=[r[3] for r in rows],
    )


class TestEvaluateMetric:
    def test_identity_series(self):
        rng = np.random.default_rng(6)
        rows = []
        for m in ("a", "b"):
            values = rng.uniform(0, 10, 8)
            rows += [(m, f"s{i}", v, v) for i, v in enumerate(values)]
        report = evaluate_metric(series_from_rows(rows))
        for row in report.per_model:
            assert row.spearman_raw == pytest.approx(1.0)
            assert row.pearson_after_fit == pytest.approx(1.0, abs=1e-7)
            assert row.residual_rmse < 1e-9
        assert report.average.spearman_raw == pytest.approx(1.0)

    def test_permutation_null_spearman_small(self):
        rng = np.random.default_rng(7)
        hits = 0
        trials = 40
        for _ in range(trials):
            subjective = np.arange(20.0)
            objective = rng.permutation(subjective)
            rows = [("m", f"s{i}", objective[i], subjective[i]) for i in range(20)]
            report = evaluate_metric(series_from_rows(rows))
            if abs(report.per_model[0].spearman_raw) < 0.5:
                hits += 1
        assert hits >= trials * 0.9

    def test_small_model_rejected(self):
        rows = [("m", "s0", 1.0, 1.0), ("m", "s1", 2.0, 2.0)]
        with pytest.raises(ValueError, match="fewer than 3"):
            evaluate_metric(series_from_rows(rows))

    def test_average_row(self):
        rng = np.random.default_rng(8)
        rows = []
        for m in ("a", "b", "c"):
            x = np.sort(rng.uniform(0, 1, 7))
            noise = rng.normal(0, 0.05, 7)
            rows += [(m, f"s{i}", x[i], 2 * x[i] + noise[i]) for i in range(7)]
        report = evaluate_metric(series_from_rows(rows))
        avg = report.average
        assert avg.model == "Average"
        assert avg.spearman_raw == pytest.approx(
            np.mean([r.spearman_raw for r in report.per_model])
        )

    def test_report_emission(self):
        rows = [("m", f"s{i}", float(i), float(i)) for i in range(6)]
        report = evaluate_metric(series_from_rows(rows))
        csv_text = report_to_csv(report)
        assert csv_text.splitlines()[0] == "model,pearson,spearman,rmse"
        assert "Average" in csv_text
        table = report_to_text(report)
        assert "r_p" in table and "m" in table

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "series.csv"
        path.write_text(
            "model,stimulus,objective,subjective\n"
            "m,a,0.1,1\nm,b,0.5,2\nm,c,0.9,3\n"
        )
        series = read_metric_series(path)
        assert series.models() == ["m"]
        np.testing.assert_allclose(series.objective, [0.1, 0.5, 0.9])
