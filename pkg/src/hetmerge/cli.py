"""Batch command-line front end: every pipeline stage is a subcommand reading
and writing named files, with all randomness behind explicit seeds.

Flags may also come from a JSON config file (--config); explicit flags win.
The fully resolved configuration is echoed into output metadata so any
artifact records how it was produced.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback

from .container import read_header
from .data import load_dataset, save_dataset
from .depth_align import brute_force_align, lma_align, sma_align
from .errors import HetmergeError, ValidationError
from .evaluation import evaluate, loss_barrier
from .features import (
    capture_features,
    load_feature_cache,
    sample_calibration,
    save_feature_cache,
)
from .merger import (
    MergeRecipe,
    identity_alignment_plan,
    merge_depth_hetero,
    merge_depth_hetero_residual,
    permute_to_reference,
)
from .model import IDENTITY_DENSE, ZERO_RESIDUAL, extend_model, extension_plan_from_segments, load_model, save_model
from .similarity import layer_similarity_matrix
from .toy import TaskSpec, gen_tasks, mlp_arch, residual_arch, train_mlp
from .width_align import build_alignment_plan

def _depth_plan(sim, method: str):
    """Segment the deeper model; `oracle` runs the exhaustive search under
    the segment-wise objective."""
    if method == "sma":
        return sma_align(sim)
    if method == "lma":
        return lma_align(sim)
    if method == "oracle":
        return brute_force_align(sim, method="SMA")
    raise ValidationError(f"unknown depth method {method!r}")


def _parse_scales(value) -> tuple[float, float]:
    if isinstance(value, str):
        parts = value.split(",")
    else:
        parts = list(value)
    if len(parts) != 2:
        raise ValidationError(f"scales must be two values, got {value!r}")
    return float(parts[0]), float(parts[1])


def _env_threads() -> int:
    try:
        return max(1, int(os.environ.get("HETMERGE_THREADS", "1")))
    except ValueError:
        return 1


def _resolve(args, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    resolved = dict(defaults)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        with open(cfg_path) as f:
            cfg = json.load(f)
        for key, value in cfg.items():
            k = key.replace("-", "_")
            if k not in defaults:
                raise ValidationError(f"unknown config key {key!r}")
            resolved[k] = value
    for k in defaults:
        v = getattr(args, k, None)
        if v is not None:
            resolved[k] = v
    return resolved


def _emit(args, payload: dict, table: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(table)


def _add_config(p) -> None:
    p.add_argument("--config", help="JSON file of flag values (flags override)")
    p.add_argument("--json", action="store_true", default=None, help="machine-readable output")


GEN_DEFAULTS = dict(
    seed=0,
    classes_per_task=5,
    input_dim=16,
    samples_per_class=600,
    train_fraction=2.0 / 3.0,
    mean_scale=2.5,
    noise_scale=1.0,
    dist_seed=0,
)


def cmd_gen_data(args) -> int:
    cfg = _resolve(args, GEN_DEFAULTS)
    spec = TaskSpec(
        classes_per_task=int(cfg["classes_per_task"]),
        input_dim=int(cfg["input_dim"]),
        samples_per_class=int(cfg["samples_per_class"]),
        train_fraction=float(cfg["train_fraction"]),
        mean_scale=float(cfg["mean_scale"]),
        noise_scale=float(cfg["noise_scale"]),
        dist_seed=int(cfg["dist_seed"]),
    )
    tasks = gen_tasks(spec, seed=int(cfg["seed"]))
    os.makedirs(args.out_dir, exist_ok=True)
    files = {
        "task_a_train": tasks.task_a_train,
        "task_a_test": tasks.task_a_test,
        "task_b_train": tasks.task_b_train,
        "task_b_test": tasks.task_b_test,
        "joint_train": tasks.joint_train,
        "joint_test": tasks.joint_test,
    }
    meta = {"config": cfg, "command": "gen-data"}
    for name, ds in files.items():
        save_dataset(ds, os.path.join(args.out_dir, f"{name}.hmm1"), metadata=meta)
    payload = {"out_dir": args.out_dir, "files": sorted(files), "config": cfg}
    _emit(args, payload, f"wrote {len(files)} datasets to {args.out_dir}")
    return 0


TRAIN_DEFAULTS = dict(
    task="a", depth=3, width=32, residual=False,
    seed=0, epochs=20, lr=0.05, batch_size=32,
)


def cmd_train(args) -> int:
    cfg = _resolve(args, TRAIN_DEFAULTS)
    data = load_dataset(args.data)
    if cfg["residual"]:
        arch = residual_arch(int(cfg["depth"]), int(cfg["width"]), data.x.shape[1])
    else:
        arch = mlp_arch(int(cfg["depth"]), int(cfg["width"]), data.x.shape[1])
    bundle = train_mlp(
        arch,
        data,
        task=str(cfg["task"]),
        seed=int(cfg["seed"]),
        epochs=int(cfg["epochs"]),
        lr=float(cfg["lr"]),
        batch_size=int(cfg["batch_size"]),
    )
    bundle = bundle.with_metadata(config=cfg, command="train")
    save_model(bundle, args.out)
    loss = bundle.metadata["loss_history"][-1]
    payload = {"out": args.out, "final_loss": loss, "config": cfg}
    _emit(args, payload, f"trained {len(arch)}-layer model -> {args.out} (final loss {loss:.4f})")
    return 0


CAPTURE_DEFAULTS = dict(batch_size=512, seed=0)


def cmd_capture(args) -> int:
    cfg = _resolve(args, CAPTURE_DEFAULTS)
    bundle = load_model(args.model)
    ds = load_dataset(args.data)
    batch = sample_calibration(ds, size=int(cfg["batch_size"]), seed=int(cfg["seed"]))
    cache = capture_features(bundle, batch)
    save_feature_cache(cache, args.out)
    payload = {"out": args.out, "layers": len(cache), "samples": cache.sample_count, "config": cfg}
    _emit(args, payload, f"captured {len(cache)} layers x {cache.sample_count} samples -> {args.out}")
    return 0


ALIGN_DEPTH_DEFAULTS = dict(method="lma")


def cmd_align_depth(args) -> int:
    cfg = _resolve(args, ALIGN_DEPTH_DEFAULTS)
    cache_a = load_feature_cache(args.cache_a)
    cache_b = load_feature_cache(args.cache_b)
    sim = layer_similarity_matrix(cache_a, cache_b)
    plan = _depth_plan(sim, str(cfg["method"]).lower())
    doc = plan.to_json()
    doc["config"] = cfg
    if args.out:
        with open(args.out, "w") as f:
            json.dump(doc, f, sort_keys=True, indent=2)
    _emit(args, doc, f"{plan.method}: g = {list(plan.g)}, score = {plan.score:.6f}")
    return 0


ALIGN_WIDTH_DEFAULTS = dict(
    strategy="zip", r=None, scale_a=0.5, scale_b=0.5, zip_fixed=False
)


def cmd_align_width(args) -> int:
    cfg = _resolve(args, ALIGN_WIDTH_DEFAULTS)
    cache_a = load_feature_cache(args.cache_a)
    cache_b = load_feature_cache(args.cache_b)
    if cache_a.input_dim != cache_b.input_dim:
        raise ValidationError("caches come from models with different input dims")
    plan = build_alignment_plan(
        cache_a,
        cache_b,
        strategy=str(cfg["strategy"]),
        input_dim=cache_a.input_dim,
        r=None if cfg["r"] is None else int(cfg["r"]),
        scale_a=float(cfg["scale_a"]),
        scale_b=float(cfg["scale_b"]),
        zip_recompute=not cfg["zip_fixed"],
    )
    doc = plan.to_json()
    doc["config"] = cfg
    if args.out:
        with open(args.out, "w") as f:
            json.dump(doc, f, sort_keys=True, indent=2)
    widths = [b.r for b in plan.boundaries]
    _emit(args, doc, f"{plan.strategy} alignment over {plan.depth} boundaries, widths {widths}")
    return 0


MERGE_DEFAULTS = dict(
    depth_method="lma",
    strategy="zip",
    r=None,
    scales="0.5,0.5",
    residual=False,
    batch_size=512,
    seed=0,
    zip_fixed=False,
)


def cmd_merge(args) -> int:
    cfg = _resolve(args, MERGE_DEFAULTS)
    a = load_model(args.a)
    b = load_model(args.b)
    if a.depth < b.depth:
        raise ValidationError("--a must be the deeper (or equal-depth) model")
    ds = load_dataset(args.calib)
    batch = sample_calibration(ds, size=int(cfg["batch_size"]), seed=int(cfg["seed"]))
    cache_a = capture_features(a, batch)

    mode = ZERO_RESIDUAL if cfg["residual"] else IDENTITY_DENSE
    method = str(cfg["depth_method"]).lower()
    if method == "homo":
        if a.depth != b.depth:
            raise ValidationError("depth-method homo requires equal depths")
        plan = None
        b_ext = b
    else:
        sim = layer_similarity_matrix(cache_a, capture_features(b, batch))
        plan = _depth_plan(sim, method)
        b_ext = extend_model(b, extension_plan_from_segments(plan, mode))
    cache_b_ext = capture_features(b_ext, batch)

    scale_a, scale_b = _parse_scales(cfg["scales"])
    strategy = str(cfg["strategy"]).lower()
    if strategy == "avg":
        aplan = identity_alignment_plan(a, b_ext, scale_a=scale_a, scale_b=scale_b)
    elif strategy in ("permute", "zip"):
        aplan = build_alignment_plan(
            cache_a,
            cache_b_ext,
            strategy=strategy,
            input_dim=a.input_dim,
            r=None if cfg["r"] is None else int(cfg["r"]),
            segment_plan=plan,
            scale_a=scale_a,
            scale_b=scale_b,
            zip_recompute=not cfg["zip_fixed"],
        )
    else:
        raise ValidationError(f"unknown strategy {strategy!r}")

    recipe = MergeRecipe(
        alignment=aplan,
        depth_plan=plan,
        extension_mode=mode,
        scales=(scale_a, scale_b),
        width_strategy=strategy,
        depth_method=method,
    )
    if cfg["residual"]:
        merged = merge_depth_hetero_residual(a, b, recipe)
    else:
        merged = merge_depth_hetero(a, b, recipe)
    merged = merged.with_metadata(config=cfg, command="merge")
    save_model(merged, args.out)

    recipe_out = args.recipe_out or (args.out + ".recipe.json")
    doc = recipe.to_metadata()
    doc["config"] = cfg
    with open(recipe_out, "w") as f:
        json.dump(doc, f, sort_keys=True, indent=2)
    payload = {
        "out": args.out,
        "recipe": recipe_out,
        "depth": merged.depth,
        "widths": [s.out_dim for s in merged.layers],
        "config": cfg,
    }
    _emit(
        args,
        payload,
        f"merged -> {args.out} (depth {merged.depth}, widths {payload['widths']}); recipe -> {recipe_out}",
    )
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    ds = load_dataset(args.data)
    report = evaluate(model, ds)
    _emit(args, report.to_json(), report.render_table())
    return 0


BARRIER_DEFAULTS = dict(aligned=False, batch_size=512, seed=0, threads=None)


def cmd_barrier(args) -> int:
    cfg = _resolve(args, BARRIER_DEFAULTS)
    a = load_model(args.a)
    b = load_model(args.b)
    ds = load_dataset(args.data)
    if cfg["aligned"]:
        if not args.calib:
            raise ValidationError("--aligned requires --calib for feature matching")
        calib = load_dataset(args.calib)
        batch = sample_calibration(calib, size=int(cfg["batch_size"]), seed=int(cfg["seed"]))
        aplan = build_alignment_plan(
            capture_features(a, batch),
            capture_features(b, batch),
            strategy="permute",
            input_dim=a.input_dim,
        )
        b = permute_to_reference(b, aplan)
    threads = int(cfg["threads"]) if cfg["threads"] is not None else _env_threads()
    report = loss_barrier(a, b, ds, threads=threads)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(report.to_csv())
    _emit(args, report.to_json(), report.render_table())
    return 0


def cmd_inspect(args) -> int:
    header = read_header(args.path)
    print(json.dumps(header, sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hetmerge",
        description="Training-free merging of depth- and width-heterogeneous networks",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate the two-task toy datasets")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--classes-per-task", type=int, default=None)
    g.add_argument("--input-dim", type=int, default=None)
    g.add_argument("--samples-per-class", type=int, default=None)
    g.add_argument("--train-fraction", type=float, default=None)
    g.add_argument("--mean-scale", type=float, default=None)
    g.add_argument("--noise-scale", type=float, default=None)
    g.add_argument("--dist-seed", type=int, default=None)
    _add_config(g)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a toy MLP on a dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--task", default=None)
    t.add_argument("--depth", type=int, default=None)
    t.add_argument("--width", type=int, default=None)
    t.add_argument("--residual", action="store_true", default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    _add_config(t)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("capture", help="capture per-layer features on a calibration batch")
    c.add_argument("--model", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--batch-size", type=int, default=None)
    c.add_argument("--seed", type=int, default=None)
    _add_config(c)
    c.set_defaults(func=cmd_capture)

    ad = sub.add_parser("align-depth", help="segment the deeper model (SMA/LMA/oracle)")
    ad.add_argument("--cache-a", required=True, help="deep model feature cache")
    ad.add_argument("--cache-b", required=True, help="shallow model feature cache")
    ad.add_argument("--method", choices=["sma", "lma", "oracle"], default=None,
                    help="DP variant; oracle enumerates all paths under the SMA objective")
    ad.add_argument("--out", help="write the plan JSON here")
    _add_config(ad)
    ad.set_defaults(func=cmd_align_depth)

    aw = sub.add_parser("align-width", help="build per-boundary merge maps")
    aw.add_argument("--cache-a", required=True)
    aw.add_argument("--cache-b", required=True, help="cache of the (extended) second model")
    aw.add_argument("--strategy", choices=["permute", "zip"], default=None)
    aw.add_argument("--r", type=int, default=None)
    aw.add_argument("--scale-a", type=float, default=None)
    aw.add_argument("--scale-b", type=float, default=None)
    aw.add_argument("--zip-fixed", action="store_true", default=None,
                    help="score zip merges on the initial correlations only")
    aw.add_argument("--out", help="write the plan JSON here")
    _add_config(aw)
    aw.set_defaults(func=cmd_align_width)

    m = sub.add_parser("merge", help="merge two models end to end")
    m.add_argument("--a", required=True, help="deeper (or equal-depth) model")
    m.add_argument("--b", required=True, help="shallower model")
    m.add_argument("--calib", required=True, help="calibration dataset container")
    m.add_argument("--out", required=True)
    m.add_argument("--recipe-out", help="recipe JSON path (default <out>.recipe.json)")
    m.add_argument("--depth-method", choices=["sma", "lma", "oracle", "homo"], default=None)
    m.add_argument("--strategy", choices=["avg", "permute", "zip"], default=None)
    m.add_argument("--r", type=int, default=None)
    m.add_argument("--scales", default=None, help="mixing weights as 'a,b' (default 0.5,0.5)")
    m.add_argument("--residual", action="store_true", default=None)
    m.add_argument("--batch-size", type=int, default=None)
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--zip-fixed", action="store_true", default=None)
    _add_config(m)
    m.set_defaults(func=cmd_merge)

    e = sub.add_parser("eval", help="joint and per-task accuracy")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    _add_config(e)
    e.set_defaults(func=cmd_eval)

    br = sub.add_parser("barrier", help="21-point interpolation loss barrier")
    br.add_argument("--a", required=True)
    br.add_argument("--b", required=True)
    br.add_argument("--data", required=True)
    br.add_argument("--aligned", action="store_true", default=None,
                    help="re-express B in A's basis (permutation match) first")
    br.add_argument("--calib", help="calibration dataset (required with --aligned)")
    br.add_argument("--batch-size", type=int, default=None)
    br.add_argument("--seed", type=int, default=None)
    br.add_argument("--threads", type=int, default=None, help="default: HETMERGE_THREADS or 1")
    br.add_argument("--csv", help="write the 21-point loss curve as CSV")
    _add_config(br)
    br.set_defaults(func=cmd_barrier)

    i = sub.add_parser("inspect", help="print a container's JSON header")
    i.add_argument("path")
    i.set_defaults(func=cmd_inspect)

    return p


def run(argv) -> int:
    """Entry point used by tests: 0 success, 2 validation/usage, 1 internal."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        return args.func(args)
    except (HetmergeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
