"""Command-line entry point wiring the full pipeline.

Subcommands: `synth` writes a toy dataset, `train` fits one translation
task, `detect` writes abnormality maps, `eval` scores them against ground
truth, `render` produces heat-map overlays. Every subcommand exits nonzero
on any error and writes only under its --out path.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import torch

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import dataset
from .baselines import (
    generator_baseline_map,
    reconstruct,
    reconstruction_errors,
    single_channel_map,
)
from .checkpoint import load_task, save_task
from .config import DETECT_MODES, RunConfig, parse_config
from .data import Direction, FlowImage, Frame, build_pairs
from .detection import detect_video
from .errors import ConfigError, CrowdGANError, InputError
from .evaluation import frame_level_eval, make_report, pixel_level_eval
from .flow import compute_flow
from .synthetic import (
    AnomalyKind,
    SceneSpec,
    generate_abnormal_video,
    generate_normal_video,
)
from .training import TrainedTask, train_task

_SYNTH_DEFAULTS = {
    "resolution": 64,
    "agent_count": 4,
    "agent_size": 5.0,
    "normal_speed": 1.0,
    "anomaly_speed_multiplier": 4.0,
    "seed": 0,
    "train_frames": 400,
    "test_frames": 200,
    "test_videos": 2,
    "anomaly_kind": "mixed",
}


def _load_synth_spec(path: Optional[str], seed: Optional[int]) -> dict:
    settings = dict(_SYNTH_DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                table = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
        for key, value in table.items():
            if key not in settings:
                raise ConfigError(f"unknown scene key {key!r}")
            settings[key] = value
    if seed is not None:
        settings["seed"] = seed
    kinds = [k.value for k in AnomalyKind] + ["mixed"]
    if settings["anomaly_kind"] not in kinds:
        raise ConfigError(
            f"anomaly_kind must be one of {kinds}, got {settings['anomaly_kind']!r}"
        )
    for key in ("train_frames", "test_frames"):
        if not isinstance(settings[key], int) or settings[key] < 2:
            raise ConfigError(f"{key} must be an integer >= 2, got {settings[key]!r}")
    if not isinstance(settings["test_videos"], int) or settings["test_videos"] < 0:
        raise ConfigError(
            f"test_videos must be a nonnegative integer, got {settings['test_videos']!r}"
        )
    return settings


def _scene(settings: dict, frames: int, seed: int, kind: AnomalyKind) -> SceneSpec:
    return SceneSpec(
        resolution=settings["resolution"],
        agent_count=settings["agent_count"],
        agent_size=settings["agent_size"],
        normal_speed=settings["normal_speed"],
        anomaly_kind=kind,
        anomaly_speed_multiplier=settings["anomaly_speed_multiplier"],
        frames_per_video=frames,
        seed=seed,
    )


def cmd_synth(args) -> int:
    settings = _load_synth_spec(args.spec, args.seed)
    seed = settings["seed"]
    if settings["anomaly_kind"] == "mixed":
        cycle = [AnomalyKind.FAST_OBJECT, AnomalyKind.LARGE_OBJECT]
    else:
        cycle = [AnomalyKind(settings["anomaly_kind"])]

    spec = _scene(settings, settings["train_frames"], seed, cycle[0])
    frames, _ = generate_normal_video(spec, video_id="train00")
    dataset.write_video(os.path.join(args.out, "train"), "train00", frames)
    print(f"train00: {len(frames)} normal frames")

    for k in range(settings["test_videos"]):
        kind = cycle[k % len(cycle)]
        spec = _scene(settings, settings["test_frames"], seed + 1 + k, kind)
        video_id = f"test{k:02d}"
        frames, gts = generate_abnormal_video(spec, video_id=video_id)
        dataset.write_video(os.path.join(args.out, "test"), video_id, frames, gts)
        abnormal = sum(gt.frame_label for gt in gts)
        print(f"{video_id}: {len(frames)} frames, {abnormal} abnormal ({kind.value})")
    return 0


def _video_flows(
    data_root: str,
    video_id: str,
    frames: Sequence[Frame],
    rc: RunConfig,
    flow_mode: str,
    jobs: int,
) -> list[FlowImage]:
    if flow_mode == "precomputed":
        flows = dataset.read_flows(data_root, video_id, rc.max_displacement)
        if flows is None:
            raise InputError(f"no precomputed flow directory for video {video_id}")
        if len(flows) != len(frames) - 1:
            raise InputError(
                f"{video_id}: expected {len(frames) - 1} flow files, got {len(flows)}"
            )
        return flows
    pairs = list(zip(frames[:-1], frames[1:]))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda ab: compute_flow(*ab, rc.flow), pairs))
    return [compute_flow(a, b, rc.flow) for a, b in pairs]


def _config_overrides(args) -> dict:
    names = {
        "resolution": "resolution",
        "base_filters": "base_filters",
        "motion_epsilon": "motion_epsilon",
        "mode": "mode",
        "epochs": "train.epochs",
        "lr": "train.learning_rate",
        "l1_weight": "train.l1_weight",
        "seed": "train.seed",
        "optimizer": "train.optimizer",
    }
    return {
        key: getattr(args, attr)
        for attr, key in names.items()
        if hasattr(args, attr) and getattr(args, attr) is not None
    }


def cmd_train(args) -> int:
    rc = parse_config(args.config, _config_overrides(args))
    torch.set_num_threads(1)
    direction = Direction(args.direction)
    pairs = []
    for video_id in dataset.list_videos(args.data):
        frames = dataset.read_frames(args.data, video_id, rc.resolution)
        flows = _video_flows(args.data, video_id, frames, rc, args.flow, args.jobs)
        pairs.extend(build_pairs(frames, flows, direction))
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    task = train_task(
        pairs, rc.train, base_filters=rc.base_filters, log_path=args.out + ".losses.csv"
    )
    save_task(args.out, task)
    print(
        f"trained {direction.value}: {len(pairs)} pairs x {rc.train.epochs} epochs "
        f"-> {args.out}"
    )
    return 0


def _load_checkpoint(path: Optional[str], flag: str, wanted: Direction, rc: RunConfig) -> TrainedTask:
    if path is None:
        raise ConfigError(f"mode {rc.mode!r} requires {flag}")
    task = load_task(path, resolution=rc.resolution)
    if task.direction is not wanted:
        raise ConfigError(
            f"{path}: expected a {wanted.value} checkpoint, got {task.direction.value}"
        )
    return task


def cmd_detect(args) -> int:
    rc = parse_config(args.config, _config_overrides(args))
    torch.set_num_threads(1)
    task_fo = task_of = None
    if rc.mode in ("discriminator", "generator", "disc-o"):
        task_fo = _load_checkpoint(args.ckpt_f2o, "--ckpt-f2o", Direction.FRAME_TO_FLOW, rc)
    if rc.mode in ("discriminator", "generator", "disc-f"):
        task_of = _load_checkpoint(args.ckpt_o2f, "--ckpt-o2f", Direction.FLOW_TO_FRAME, rc)

    for video_id in dataset.list_videos(args.data):
        frames = dataset.read_frames(args.data, video_id, rc.resolution)
        flows = _video_flows(args.data, video_id, frames, rc, args.flow, args.jobs)
        if rc.mode == "discriminator":
            maps = detect_video(task_fo, task_of, frames, flows, rc.motion_epsilon)
        elif rc.mode == "generator":
            errors = []
            for t in range(len(flows)):
                r_o, r_f = reconstruct(task_fo, task_of, frames[t], flows[t])
                errors.append(reconstruction_errors(frames[t], flows[t], r_f, r_o))
            maps = generator_baseline_map(errors, flows, rc.motion_epsilon)
        elif rc.mode == "disc-f":
            maps = single_channel_map(task_of, "F", frames, flows, rc.motion_epsilon)
        else:
            maps = single_channel_map(task_fo, "O", frames, flows, rc.motion_epsilon)
        dataset.write_maps(args.out, video_id, maps)
        print(f"{video_id}: wrote {len(maps)} abnormality maps ({rc.mode})")
    return 0


def cmd_eval(args) -> int:
    video_ids = dataset.list_map_videos(args.maps)
    all_maps, all_gts = [], []
    for video_id in video_ids:
        maps, indices = dataset.read_maps(args.maps, video_id)
        gts = dataset.read_gts(args.gt, video_id, indices, maps[0].shape)
        all_maps.extend(maps)
        all_gts.extend(gts)
    if args.protocol == "frame":
        curve = frame_level_eval(all_maps, [gt.frame_label for gt in all_gts])
    else:
        curve = pixel_level_eval(all_maps, all_gts)
    report = {"protocol": args.protocol, "videos": video_ids, "frames": len(all_maps)}
    report.update(make_report(curve))
    dataset.write_report(args.out, report)
    print(
        f"{args.protocol}-level over {len(all_maps)} frames: "
        f"AUC {report['auc']:.4f} EER {report['eer']:.4f} -> {args.out}"
    )
    return 0


def cmd_render(args) -> int:
    from .viz import render_heatmap

    video_ids = dataset.list_map_videos(args.maps)
    if args.video is not None:
        if args.video not in video_ids:
            raise InputError(f"no detection output for video {args.video!r}")
        video_ids = [args.video]
    for video_id in video_ids:
        maps, indices = dataset.read_maps(args.maps, video_id)
        frames = dataset.read_frames(args.data, video_id, maps[0].shape[0])
        by_index = {f.index: f for f in frames}
        out_dir = os.path.join(args.out, video_id)
        os.makedirs(out_dir, exist_ok=True)
        for values, index in zip(maps, indices):
            overlay = render_heatmap(values, by_index[index])
            dataset.write_frame_png(os.path.join(out_dir, f"{index:06d}.png"), overlay)
        print(f"{video_id}: rendered {len(maps)} overlays")
    return 0


def _add_config_flags(sub: argparse.ArgumentParser, training: bool) -> None:
    sub.add_argument("--config", help="TOML run configuration")
    sub.add_argument("--resolution", type=int, help="working image size")
    sub.add_argument("--base-filters", dest="base_filters", type=int,
                     help="network channel width")
    sub.add_argument("--flow", choices=("computed", "precomputed"),
                     default="computed", help="flow source (default computed)")
    sub.add_argument("--jobs", type=int, default=1,
                     help="parallel flow workers (default 1)")
    if training:
        sub.add_argument("--epochs", type=int, help="training epochs")
        sub.add_argument("--lr", type=float, help="learning rate")
        sub.add_argument("--lambda", dest="l1_weight", type=float,
                         help="L1 loss weight")
        sub.add_argument("--seed", type=int, help="training seed")
        sub.add_argument("--optimizer", choices=("momentum", "adaptive-moments"),
                         help="optimizer kind")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdgan",
        description="Cross-channel adversarial video anomaly detection.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="write a deterministic toy dataset")
    p.add_argument("--spec", help="scene spec TOML")
    p.add_argument("--out", required=True, help="dataset root to create")
    p.add_argument("--seed", type=int, help="override the scene seed")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("train", help="train one translation task")
    p.add_argument("--direction", required=True, choices=("f2o", "o2f"))
    p.add_argument("--data", required=True, help="dataset root (normal videos)")
    p.add_argument("--out", required=True, help="checkpoint path to write")
    _add_config_flags(p, training=True)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("detect", help="write abnormality maps")
    p.add_argument("--ckpt-f2o", dest="ckpt_f2o", help="frames-to-flow checkpoint")
    p.add_argument("--ckpt-o2f", dest="ckpt_o2f", help="flow-to-frames checkpoint")
    p.add_argument("--data", required=True, help="dataset root to score")
    p.add_argument("--out", required=True, help="output directory for maps")
    p.add_argument("--mode", choices=DETECT_MODES, help="detector variant")
    p.add_argument("--motion-epsilon", dest="motion_epsilon", type=float,
                   help="static-pixel flow threshold")
    _add_config_flags(p, training=False)
    p.set_defaults(func=cmd_detect)

    p = subs.add_parser("eval", help="score maps against ground truth")
    p.add_argument("--maps", required=True, help="detection output root")
    p.add_argument("--gt", required=True, help="dataset root with gt/ directories")
    p.add_argument("--protocol", choices=("frame", "pixel"), default="frame")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("render", help="write heat-map overlays")
    p.add_argument("--maps", required=True, help="detection output root")
    p.add_argument("--data", required=True, help="dataset root with frames")
    p.add_argument("--out", required=True, help="output directory for overlays")
    p.add_argument("--video", help="restrict to one video id")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CrowdGANError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
