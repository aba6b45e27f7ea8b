"""Acceptance suite: one test per release criterion, at pinned tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL
line per criterion. Criteria that compare against the released subjective
dataset skip unless TEXMESHQA_DATASET_DIR points at the score CSVs
described in the README.
"""

import itertools
import json
import os
import random
import struct
import time
import zlib
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from ssim_oracle import oracle_ms_ssim, oracle_ssim
from texmeshqa.benchmark import (
    MetricSeries,
    evaluate_metric,
    logistic_fit,
    read_metric_series,
    spearman,
)
from texmeshqa.curvature import mean_curvature
from texmeshqa.distortions import jpeg_recompress, quantize
from texmeshqa.fusion import QualityPair, fit_alpha, read_score_file
from texmeshqa.image_metrics import LuminanceImage, ms_ssim, ssim
from texmeshqa.mesh import TextureImage
from texmeshqa.scoring import (
    kendalls_w,
    preference_matrix,
    thurstone_case_v,
    vote_scores,
)
from texmeshqa.sdcd import SdcdConfig, sdcd
from texmeshqa.shapes import (
    bumpy_sphere,
    cylinder,
    cylinder_interior_vertices,
    grid_interior_vertices,
    grid_plane,
    icosphere,
)
from texmeshqa.sorting import (
    SortSession,
    StudyDesign,
    grid_design,
    random_consistent_order,
    simulate_sessions,
)
from texmeshqa.study_store import StudyStore

DATASET_DIR = os.environ.get("TEXMESHQA_DATASET_DIR")


@contextmanager
def criterion(name):
    started = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"\n[criterion] {name}: FAIL ({time.monotonic() - started:.1f}s)")
        raise
    print(f"\n[criterion] {name}: PASS ({time.monotonic() - started:.1f}s)")


def run_consistent(session, truth):
    quality = {s: len(truth) - i for i, s in enumerate(truth)}
    while not session.done:
        a, b = session.next_pair()
        session.report(a if quality[a] > quality[b] else b)
    return session


def test_curvature_oracle():
    with criterion("curvature oracle (sphere/plane/cylinder)"):
        started = time.monotonic()

        sphere = icosphere(subdivisions=3, radius=1.0)
        sphere_mean = mean_curvature(sphere).values.mean()
        assert abs(sphere_mean - 1.0) < 0.05

        plane = grid_plane(10, 10, 1.0)
        interior = grid_interior_vertices(10, 10)
        assert np.abs(mean_curvature(plane).values[interior]).max() <= 1e-9

        tube = cylinder(radius=2.0, height=20.0, n_theta=64, n_z=40)
        inner = cylinder_interior_vertices(64, 40)
        tube_mean = mean_curvature(tube).values[inner].mean()
        assert abs(tube_mean - 0.25) < 0.0125

        assert time.monotonic() - started < 10.0


def test_sdcd_identity_and_bounds():
    with criterion("geometry metric identity, bounds, rigid invariance"):
        started = time.monotonic()
        rng = np.random.default_rng(42)

        meshes = [
            icosphere(3, 1.0),
            icosphere(2, 2.5),
            bumpy_sphere(subdivisions=4),
            cylinder(1.0, 8.0, 48, 24),
            grid_plane(16, 16, 0.25),
        ]
        for mesh in meshes:
            result = sdcd(mesh, mesh)
            assert result.distance == 0.0
            assert result.similarity == 1.0

            noisy = mesh.with_vertices(
                mesh.vertices + rng.normal(size=mesh.vertices.shape) * 0.002
            )
            result = sdcd(noisy, mesh)
            assert 0.0 <= result.distance <= 1.0
            assert np.all(result.per_vertex >= 0.0)
            assert np.all(result.per_vertex <= 1.0)
            assert result.similarity == 1.0 - result.distance

        ref = icosphere(3, 1.0)
        distorted = ref.with_vertices(
            ref.vertices + rng.normal(size=ref.vertices.shape) * 0.004
        )
        config = SdcdConfig.from_reference(ref)
        base = sdcd(distorted, ref, config).distance
        theta = 0.47
        rot = np.array(
            [
                [np.cos(theta), 0, np.sin(theta)],
                [0, 1, 0],
                [-np.sin(theta), 0, np.cos(theta)],
            ]
        )
        shift = np.array([-2.0, 4.0, 1.5])
        moved = sdcd(
            distorted.with_vertices(distorted.vertices @ rot.T + shift),
            ref.with_vertices(ref.vertices @ rot.T + shift),
            config,
        ).distance
        assert abs(moved - base) < 1e-6

        assert time.monotonic() - started < 60.0


def test_sdcd_quantization_monotonicity():
    with criterion("geometry metric separates quantization levels 10/9/8/7"):
        ref = bumpy_sphere(subdivisions=5)
        assert ref.vertex_count >= 10_000
        config = SdcdConfig.from_reference(ref)
        ref_curv = mean_curvature(ref)
        similarity = [
            sdcd(quantize(ref, bits), ref, config, reference_curvature=ref_curv).similarity
            for bits in (10, 9, 8, 7)
        ]
        assert similarity[0] > similarity[1] > similarity[2] > similarity[3]


def test_sdcd_dataset_correlations():
    if not DATASET_DIR:
        pytest.skip("released dataset not ingested (set TEXMESHQA_DATASET_DIR)")
    with criterion("geometry metric correlation on released dataset"):
        path = Path(DATASET_DIR) / "sdcd_shaded.csv"
        series = read_metric_series(path)
        report = evaluate_metric(series)
        expected = {"Squirrel": 0.55, "Hulk": 0.80, "Statue": 0.64, "SportCar": 0.41, "Dwarf": 0.86}
        for row in report.per_model:
            assert abs(abs(row.spearman_raw) - expected[row.model]) <= 0.05


def acceptance_images(size=192):
    y, x = np.mgrid[0:size, 0:size] / size
    rng = np.random.default_rng(77)
    from scipy.ndimage import gaussian_filter

    scenes = [
        0.15 + 0.7 * x * y + 0.15 * y,
        0.5 + 0.5 * np.sin(16 * x) * np.cos(9 * y),
        gaussian_filter(rng.uniform(0, 1, (size, size)), 2.5),
        0.5 + 0.45 * np.cos(35 * np.hypot(x - 0.4, y - 0.6)),
        np.clip(
            0.25 + 0.5 * (np.floor(x * 10) % 2 == np.floor(y * 10) % 2)
            + gaussian_filter(rng.normal(0, 0.12, (size, size)), 1.2),
            0,
            1,
        ),
    ]
    return [np.clip(s, 0, 1) for s in scenes]


def test_image_metric_oracle_equivalence():
    with criterion("structural similarity matches independent oracle"):
        from scipy.ndimage import gaussian_filter

        rng = np.random.default_rng(78)
        for scene in acceptance_images():
            img = LuminanceImage(scene)
            assert ssim(img, img) == 1.0
            assert ms_ssim(img, img) == 1.0

            as_texture = TextureImage((scene * 255).astype(np.uint8)[:, :, None])
            variants = {
                "blur": gaussian_filter(scene, 2.0),
                "noise": np.clip(scene + rng.normal(0, 0.07, scene.shape), 0, 1),
                "jpeg": jpeg_recompress(as_texture, 8).pixels[:, :, 0] / 255.0,
            }
            for distorted in variants.values():
                a, b = LuminanceImage(scene), LuminanceImage(distorted)
                assert abs(ssim(a, b) - oracle_ssim(scene, distorted)) <= 1e-4
                assert abs(ms_ssim(a, b) - oracle_ms_ssim(scene, distorted)) <= 1e-4


def test_alpha_recovery_synthetic():
    with criterion("fusion weight recovery within 0.05 over 20 seeds"):
        alpha_star = 0.13
        n_models, n_stimuli = 5, 30
        for seed in range(20):
            rng = np.random.default_rng(seed)
            dataset = []
            for m in range(n_models):
                q_g = rng.uniform(0, 1, n_stimuli)
                q_t = rng.uniform(0, 1, n_stimuli)
                fused = alpha_star * q_g + (1 - alpha_star) * q_t
                subjective = fused + rng.normal(0, 0.015, n_stimuli)
                dataset += [
                    (
                        QualityPair(
                            q_g=q_g[i], q_t=q_t[i], source_model=f"m{m}", stimulus=f"s{i}"
                        ),
                        subjective[i],
                    )
                    for i in range(n_stimuli)
                ]
            for m in range(n_models):
                fit = fit_alpha(dataset, heldout_model=f"m{m}")
                assert abs(fit.alpha - alpha_star) <= 0.05


def test_alpha_on_dataset():
    if not DATASET_DIR:
        pytest.skip("released dataset not ingested (set TEXMESHQA_DATASET_DIR)")
    with criterion("fusion weights on released dataset"):
        dataset = read_score_file(Path(DATASET_DIR) / "cm2_shaded.csv")
        expected = {"Squirrel": 0.117, "Hulk": 0.184, "Statue": 0.133, "SportCar": 0.132, "Dwarf": 0.111}
        for model, alpha_expected in expected.items():
            fit = fit_alpha(dataset, heldout_model=model)
            assert 0.026 <= fit.alpha <= 0.184
            assert abs(fit.alpha - alpha_expected) <= 0.03


def test_interleave_sorter_recovery_and_bounds():
    with criterion("interleave sorter exact recovery and count bounds"):
        started = time.monotonic()
        design = grid_design(5, 4)
        rng = random.Random(4242)
        for _ in range(200):
            truth = random_consistent_order(design, rng)
            session = SortSession(design, "interleave", seed=rng.getrandbits(32))
            run_consistent(session, truth)
            assert session.ranking == truth
            assert 20 <= session.comparisons <= 44
        assert time.monotonic() - started < 30.0


def test_interleave_sorter_mean_comparisons():
    # Target band: 36 +/- 4 over uniformly random consistent ground truths.
    # Known to be unattainable for any procedure that recovers such
    # orders exactly: there are 20!/(4!^5) ~ 3.06e11 of them, so exact
    # recovery needs at least log2 of that = 38.15 comparisons on
    # average, and the head-to-head merge cascade needs 40.81
    # (sum of m+n - m/(n+1) - n/(m+1) over the merge schedule). Averages
    # near 36 arise only when quality orders cluster by distortion type,
    # as real observers' do; simulate-study --type-spread 8 reproduces
    # that regime. Kept as stated so the gap stays visible.
    with criterion("interleave sorter mean comparisons in [32, 40]"):
        started = time.monotonic()
        result = simulate_sessions(
            grid_design(5, 4), mode="interleave", sessions=10_000, accuracy=1.0, seed=99
        )
        assert result["exact_recovery_rate"] == 1.0
        assert time.monotonic() - started < 30.0
        assert 32.0 <= result["mean_comparisons"] <= 40.0


def test_bst_sorter():
    with criterion("tree sorter exact recovery and mean comparisons"):
        started = time.monotonic()

        items8 = [f"s{k}" for k in range(8)]
        design8 = StudyDesign.from_chains([(s,) for s in items8])
        for perm in itertools.permutations(items8):
            session = SortSession(design8, "bst")
            run_consistent(session, list(perm))
            assert session.ranking == list(perm)

        items36 = [f"s{k}" for k in range(36)]
        design36 = StudyDesign.from_chains([(s,) for s in items36])
        rng = random.Random(777)
        counts = []
        for _ in range(1000):
            truth = items36[:]
            rng.shuffle(truth)
            session = SortSession(design36, "bst")
            run_consistent(session, truth)
            assert session.ranking == truth
            assert session.comparisons <= 36 * 6
            counts.append(session.comparisons)
        mean = sum(counts) / len(counts)
        assert 125.0 <= mean <= 155.0
        assert time.monotonic() - started < 30.0


def test_scoring_invariants():
    with criterion("vote scores, rank concordance, inverse-normal scaling"):
        rng = random.Random(31)

        # vote score sum invariant over 100 random preference matrices
        for _ in range(100):
            n_items = rng.randint(2, 15)
            n_subjects = rng.randint(1, 8)
            items = [f"i{k}" for k in range(n_items)]
            rankings = []
            for _ in range(n_subjects):
                order = items[:]
                rng.shuffle(order)
                rankings.append(order)
            scores = vote_scores(preference_matrix(rankings))
            assert scores.values.sum() == pytest.approx(
                n_items * (n_items - 1) / 2, abs=1e-9
            )

        # concordance equals the definitional computation across the small grid
        def definitional_w(rankings):
            items = sorted(rankings[0])
            n_s, n_m = len(rankings), len(items)
            sums = {i: 0 for i in items}
            for r in rankings:
                for pos, item in enumerate(r):
                    sums[item] += pos + 1
            mean_sum = sum(sums.values()) / n_m
            s = sum((v - mean_sum) ** 2 for v in sums.values())
            return 12.0 * s / (n_s * n_s * (n_m**3 - n_m))

        for n_m in (3, 4, 5):
            items = [f"i{k}" for k in range(n_m)]
            perms = [list(p) for p in itertools.permutations(items)]
            for n_s in (2, 3, 4):
                if len(perms) ** n_s <= 20_736:
                    cases = itertools.product(perms, repeat=n_s)
                    for combo in cases:
                        rankings = [list(r) for r in combo]
                        assert kendalls_w(rankings).w == pytest.approx(
                            definitional_w(rankings), abs=1e-12
                        )
                else:
                    for _ in range(300):
                        rankings = []
                        for _ in range(n_s):
                            order = items[:]
                            rng.shuffle(order)
                            rankings.append(order)
                        assert kendalls_w(rankings).w == pytest.approx(
                            definitional_w(rankings), abs=1e-12
                        )

        # inverse-normal scaling tracks vote counts on noisy consistent studies
        for seed in range(5):
            nrng = np.random.default_rng(seed)
            items = [f"i{k}" for k in range(20)]
            utilities = np.linspace(0, 3, 20)
            rankings = [
                [items[k] for k in np.argsort(-(utilities + nrng.normal(0, 0.8, 20)))]
                for _ in range(15)
            ]
            matrix = preference_matrix(rankings)
            r = stats.pearsonr(
                vote_scores(matrix).values, thurstone_case_v(matrix).values
            ).statistic
            assert r > 0.99


def test_evaluation_bench():
    with criterion("benchmark identity, logistic recovery, exact rank case"):
        rng = np.random.default_rng(55)
        rows = []
        for m in ("a", "b"):
            values = rng.uniform(0, 10, 10)
            rows += [(m, f"s{i}", v, v) for i, v in enumerate(values)]
        series = MetricSeries(
            model=tuple(r[0] for r in rows),
            stimulus=tuple(r[1] for r in rows),
            objective=[r[2] for r in rows],
            subjective=[r[3] for r in rows],
        )
        report = evaluate_metric(series)
        for row in report.per_model:
            assert row.spearman_raw == pytest.approx(1.0, abs=1e-12)
            assert row.pearson_after_fit == pytest.approx(1.0, abs=1e-9)
            assert row.residual_rmse < 1e-9

        from scipy.special import expit

        q = np.sort(rng.uniform(-1, 1, 25))
        s = 1.5 + 6.0 * expit((q - 0.2) / 0.25)
        fit = logistic_fit(q, s)
        assert fit.residual_rmse < 1e-6

        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)


def test_combined_metric_dataset_tables():
    if not DATASET_DIR:
        pytest.skip("released dataset not ingested (set TEXMESHQA_DATASET_DIR)")
    with criterion("combined metric correlations on released dataset"):
        dataset = read_score_file(Path(DATASET_DIR) / "cm2_shaded.csv")
        expected_rs = {"Squirrel": 0.72, "Hulk": 0.72, "Statue": 0.68, "SportCar": 0.51, "Dwarf": 0.70}
        models = list(dict.fromkeys(p.source_model for p, _ in dataset))
        for model in models:
            fit = fit_alpha(dataset, heldout_model=model)
            held = [(p, s) for p, s in dataset if p.source_model == model]
            cm = [fit.alpha * p.q_g + (1 - fit.alpha) * p.q_t for p, _ in held]
            subj = [s for _, s in held]
            assert abs(spearman(cm, subj) - expected_rs[model]) <= 0.05

        for tag, expected in (("shaded", 0.85), ("unshaded", 0.87)):
            path = Path(DATASET_DIR) / f"compound_{tag}.csv"
            series = read_metric_series(path)
            report = evaluate_metric(series)
            assert abs(report.per_model[0].spearman_raw - expected) <= 0.05


def _study_fixture(tmp_path):
    chains = [[f"t{t}l{level}" for level in range(1, 5)] for t in range(5)]
    media = tmp_path / "media"
    media.mkdir(parents=True, exist_ok=True)
    names = [f"{s}.mp4" for chain in chains for s in chain] + ["ref.mp4"]
    for name in names:
        (media / name).write_bytes(b"x" * 32)
    manifest = {
        "study_id": "durability",
        "stimuli": [{"id": s, "media": f"{s}.mp4"} for chain in chains for s in chain],
        "reference_media": "ref.mp4",
        "chains": chains,
        "sorter": "interleave",
        "rendering": "shaded",
    }
    return manifest, chains


def test_service_durability(tmp_path):
    with criterion("service restart durability over 100 crash injections"):
        manifest, chains = _study_fixture(tmp_path)
        store = StudyStore(tmp_path)
        store.create_study(manifest)
        store.close()

        rng = random.Random(8080)
        log_path = tmp_path / "events.log"
        for iteration in range(100):
            store = StudyStore(tmp_path)
            record = store.create_session("durability")
            session_id = record.session_id

            quality = {}
            for chain in chains:
                values = sorted((rng.random() for _ in chain), reverse=True)
                for stim, v in zip(chain, values):
                    quality[stim] = v

            acked = []
            for _ in range(rng.randint(1, 15)):
                payload = store.pending_pair(session_id)
                if payload["pair"] is None:
                    break
                pair = payload["pair"]
                a, b = pair["a"]["id"], pair["b"]["id"]
                winner = a if quality[a] > quality[b] else b
                store.submit_choice(session_id, pair["token"], winner)
                acked.append(winner)
            expected_pair = store.pending_pair(session_id)
            store.close()  # hard stop: nothing but the log survives

            if rng.random() < 0.5:
                # crash mid-append: torn bytes after the acknowledged records
                garbage = rng.randbytes(rng.randint(1, 40))
                with open(log_path, "ab") as fh:
                    fh.write(
                        struct.pack("<II", len(garbage) + 64, zlib.crc32(garbage))
                    )
                    fh.write(garbage)

            recovered = StudyStore(tmp_path)
            replayed = recovered.sessions[session_id]
            transcript_winners = [w for _, w in replayed.sorter.transcript]
            assert transcript_winners == acked  # every acked choice survived
            if replayed.status == "active":
                assert recovered.pending_pair(session_id) == expected_pair
            recovered.close()
