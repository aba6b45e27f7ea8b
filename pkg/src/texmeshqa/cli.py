"""Command-line entry point.

Subcommands: metric, distort, fit-alpha, evaluate, score, simulate-study,
serve. Exit codes: 0 success, 1 runtime failure, 2 usage or missing-input
error. Machine output (--format json) is byte-stable for fixed inputs and
seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import MeshFormatError, MeshValidationError, TextureResolutionError

USAGE_EXIT = 2
RUNTIME_EXIT = 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TextureResolutionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (MeshFormatError, MeshValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="texmeshqa",
        description="Perceptual quality assessment of textured 3D meshes",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("metric", help="compare a distorted mesh against a reference")
    p.add_argument("--reference", required=True, help="reference OBJ file")
    p.add_argument("--distorted", required=True, help="distorted OBJ file")
    p.add_argument("--geometry", choices=["sdcd", "rmse"], default="sdcd")
    p.add_argument("--texture", choices=["ms-ssim", "ssim", "rmse"], default="ms-ssim")
    p.add_argument("--alpha", type=float, help="fusion weight for the combined metric")
    p.add_argument("--alpha-file", help="CSV of heldout_model,alpha rows; first row is used")
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("distort", help="apply a distortion to a mesh")
    p.add_argument("--input", required=True, help="input OBJ file")
    p.add_argument("--spec", required=True, help="e.g. quantize:7 smooth:50 subsample:3 jpeg:6 external:path.obj")
    p.add_argument("--output", required=True, help="output OBJ file")
    p.set_defaults(func=cmd_distort)

    p = sub.add_parser("fit-alpha", help="leave-one-model-out fusion weight fitting")
    p.add_argument("--scores", required=True, help="CSV: model,stimulus,q_g,q_t,subjective")
    p.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p.set_defaults(func=cmd_fit_alpha)

    p = sub.add_parser("evaluate", help="correlation benchmark of a metric against subjective scores")
    p.add_argument("--series", required=True, help="CSV: model,stimulus,objective,subjective")
    p.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("score", help="aggregate subject rankings into scores and agreement")
    p.add_argument("rankings", nargs="+", help="per-subject ranking CSVs (stimulus,rank)")
    p.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate-study", help="run synthetic observers through a sorter")
    p.add_argument("--mode", choices=["interleave", "bst"], default="interleave")
    p.add_argument("--types", type=int, default=5, help="distortion-type chain count")
    p.add_argument("--levels", type=int, default=4, help="strength levels per chain")
    p.add_argument("--sessions", type=int, default=10000)
    p.add_argument("--p", type=float, default=1.0, help="probability of choosing the truly better stimulus")
    p.add_argument("--type-spread", type=float, default=0.0,
                   help="systematic quality offset spread between distortion types "
                        "(0 = uniform random consistent ground truths)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the paired-comparison study service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def _load_mesh_checked(path: str):
    from .obj_io import load_mesh

    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return load_mesh(path)


def cmd_metric(args) -> int:
    from .correspondence import geometry_rmse
    from .fusion import QualityPair, combine
    from .image_metrics import texture_quality
    from .sdcd import sdcd

    reference = _load_mesh_checked(args.reference)
    distorted = _load_mesh_checked(args.distorted)

    out: dict = {"reference": args.reference, "distorted": args.distorted}
    if args.geometry == "sdcd":
        result = sdcd(distorted, reference)
        out["geometry"] = {"metric": "sdcd", "distance": result.distance, "q_g": result.similarity}
        q_g = result.similarity
    else:
        rmse = geometry_rmse(distorted, reference)
        out["geometry"] = {"metric": "rmse", "value": rmse}
        q_g = None

    q_t = None
    if reference.textures and distorted.textures:
        metric = args.texture.replace("-", "_")
        tq = texture_quality(distorted.textures, reference.textures, metric)
        out["texture"] = {
            "metric": args.texture,
            "per_texture": [{"index": i, "value": v} for i, v in tq.per_texture],
            "aggregate": tq.aggregate,
        }
        if metric != "rmse":
            q_t = tq.aggregate
    else:
        out["texture"] = None

    alpha = args.alpha
    if alpha is None and args.alpha_file:
        alpha = _read_first_alpha(args.alpha_file)
    if alpha is not None and q_g is not None and q_t is not None:
        out["combined"] = {
            "alpha": alpha,
            "cm": combine(QualityPair(q_g=q_g, q_t=q_t), alpha),
        }

    if args.format == "json":
        print(json.dumps(out, sort_keys=True))
    else:
        _print_metric_table(out)
    return 0


def _read_first_alpha(path: str) -> float:
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "alpha" not in reader.fieldnames:
            raise ValueError(f"{path}: expected a CSV with an alpha column")
        for row in reader:
            return float(row["alpha"])
    raise ValueError(f"{path}: no alpha rows")


def _print_metric_table(out: dict) -> None:
    geo = out["geometry"]
    if geo["metric"] == "sdcd":
        print(f"geometry sdcd      distance={geo['distance']:.6f}  q_g={geo['q_g']:.6f}")
    else:
        print(f"geometry rmse      value={geo['value']:.6g}")
    tex = out["texture"]
    if tex is None:
        print("texture            (no textures on both meshes)")
    else:
        for item in tex["per_texture"]:
            print(f"texture[{item['index']}] {tex['metric']:<8} {item['value']:.6f}")
        print(f"texture aggregate  {tex['aggregate']:.6f}")
    if "combined" in out:
        print(f"combined           alpha={out['combined']['alpha']:g}  CM={out['combined']['cm']:.6f}")


def cmd_distort(args) -> int:
    from .distortions import DistortionSpec, apply_distortion
    from .obj_io import save_mesh

    try:
        spec = DistortionSpec.parse(args.spec)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    mesh = _load_mesh_checked(args.input)
    result = apply_distortion(mesh, spec)
    out_path = Path(args.output)
    save_mesh(result, out_path)
    sidecar = out_path.with_suffix(out_path.suffix + ".json")
    sidecar.write_text(
        json.dumps({"input": args.input, "distortion": spec.describe()}, sort_keys=True)
    )
    print(f"wrote {out_path} ({spec.describe()})")
    return 0


def cmd_fit_alpha(args) -> int:
    from .fusion import fit_alpha_leave_one_out, read_score_file

    dataset = read_score_file(args.scores)
    fits = fit_alpha_leave_one_out(dataset)
    if args.format == "json":
        print(json.dumps([vars(f) for f in fits], sort_keys=True))
    elif args.format == "csv":
        print("heldout_model,alpha,training_spearman")
        for f in fits:
            print(f"{f.heldout_model},{f.alpha},{f.training_spearman:.6f}")
    else:
        for f in fits:
            print(f"{f.heldout_model:<16} alpha={f.alpha:.3f}  training r_s={f.training_spearman:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    from .benchmark import evaluate_metric, read_metric_series, report_to_csv, report_to_text

    series = read_metric_series(args.series)
    report = evaluate_metric(series)
    if args.format == "json":
        print(json.dumps([vars(r) for r in report.rows()], sort_keys=True))
    elif args.format == "csv":
        print(report_to_csv(report), end="")
    else:
        print(report_to_text(report), end="")
    return 0


def cmd_score(args) -> int:
    from .scoring import (
        kendalls_w,
        preference_matrix,
        read_ranking_csv,
        scores_to_csv,
        thurstone_case_v,
        vote_scores,
    )

    rankings = [read_ranking_csv(p) for p in args.rankings]
    matrix = preference_matrix(rankings)
    scores = vote_scores(matrix)
    thurstone = thurstone_case_v(matrix)
    result = {
        "n_subjects": matrix.n_subjects,
        "n_stimuli": matrix.n_stimuli,
        "vote_scores": scores.as_dict(),
        "thurstone": thurstone.as_dict(),
    }
    if matrix.n_subjects >= 2 and matrix.n_stimuli >= 3:
        w = kendalls_w(rankings)
        result["kendalls_w"] = {"w": w.w, "p_value": w.p_value}
    if args.format == "json":
        print(json.dumps(result, sort_keys=True))
    elif args.format == "csv":
        print(scores_to_csv(scores), end="")
    else:
        if "kendalls_w" in result:
            print(f"kendalls_w={result['kendalls_w']['w']:.4f}  p={result['kendalls_w']['p_value']:.3g}")
        order = sorted(scores.as_dict().items(), key=lambda kv: -kv[1])
        for stim, score in order:
            print(f"{stim:<24} {score:.4f}")
    return 0


def cmd_simulate(args) -> int:
    import random

    from .sorting import SortSession, StudyDesign, grid_design, simulate_sessions

    if args.mode == "bst" and args.types * args.levels > 0 and args.levels == 1:
        design = StudyDesign.from_chains([(f"s{i}",) for i in range(args.types)])
    else:
        design = grid_design(args.types, args.levels)

    if args.type_spread > 0:
        stats = _simulate_with_type_spread(design, args)
    else:
        stats = simulate_sessions(
            design,
            mode=args.mode,
            sessions=args.sessions,
            accuracy=args.p,
            seed=args.seed,
        )
    if args.format == "json":
        print(json.dumps(stats, sort_keys=True))
    else:
        for key in sorted(stats):
            print(f"{key:<22} {stats[key]}")
    return 0


def _simulate_with_type_spread(design, args) -> dict:
    import random

    from .sorting import SortSession

    rng = random.Random(args.seed)
    counts, exact = [], 0
    for _ in range(args.sessions):
        offsets = [rng.uniform(0, args.type_spread) for _ in design.chains]
        quality = {}
        for offset, chain in zip(offsets, design.chains):
            draws = sorted((offset - i + rng.gauss(0, 0.15) for i in range(len(chain))), reverse=True)
            for stim, q in zip(chain, draws):
                quality[stim] = q
        truth = sorted(design.stimuli, key=lambda s: -quality[s])
        session = SortSession(design, mode=args.mode, seed=rng.getrandbits(32))
        while not session.done:
            a, b = session.next_pair()
            better = a if quality[a] > quality[b] else b
            worse = b if better == a else a
            session.report(better if rng.random() < args.p else worse)
        counts.append(session.comparisons)
        exact += session.ranking == truth
    counts.sort()
    n = len(counts)
    return {
        "sessions": n,
        "mean_comparisons": sum(counts) / n,
        "min_comparisons": counts[0],
        "max_comparisons": counts[-1],
        "median_comparisons": counts[n // 2],
        "exact_recovery_rate": exact / n,
    }


def cmd_serve(args) -> int:
    from .service import serve

    serve(args.data_dir, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
