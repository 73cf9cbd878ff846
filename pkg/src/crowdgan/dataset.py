"""On-disk dataset and result layout.

A dataset root holds one directory per video: `<root>/<id>/frames/%06d.png`,
optional `<root>/<id>/flow/%06d.flo` (flow between frames t and t+1, stored
under index t) and optional `<root>/<id>/gt/%06d.png` (nonzero = abnormal
pixel; a missing file or directory means the frame is normal). Detection
results go to `<maps>/<id>/%06d.png` as 16-bit grayscale (round(A * 65535))
next to a `scores.json` listing frame indices and per-frame maxima.
"""

from __future__ import annotations

import json
import os
from typing import Optional, Sequence

import cv2
import numpy as np

from .data import AbnormalityMap, FlowImage, Frame, GroundTruth, rescale_frame
from .errors import FormatError, InputError
from .flow import load_precomputed_flow, save_flow

FRAME_DIR = "frames"
FLOW_DIR = "flow"
GT_DIR = "gt"
SCORES_FILE = "scores.json"
MAP_SCALE = 65535


def _frame_name(index: int) -> str:
    return f"{index:06d}.png"


def _indexed_files(directory: str, suffix: str) -> list[tuple[int, str]]:
    """(index, path) pairs for files named %06d<suffix>, sorted by index."""
    out = []
    for name in os.listdir(directory):
        stem, _, ext = name.partition(".")
        if "." + ext == suffix and stem.isdigit():
            out.append((int(stem), os.path.join(directory, name)))
    return sorted(out)


def list_videos(root: str) -> list[str]:
    """Video ids under a dataset root (directories containing frames/)."""
    if not os.path.isdir(root):
        raise InputError(f"dataset root {root} is not a directory")
    ids = [
        name
        for name in sorted(os.listdir(root))
        if os.path.isdir(os.path.join(root, name, FRAME_DIR))
    ]
    if not ids:
        raise InputError(f"no videos found under {root}")
    return ids


def write_frame_png(path: str, pixels01: np.ndarray) -> None:
    arr = np.round(np.asarray(pixels01, dtype=np.float64) * 255.0)
    bgr = arr.astype(np.uint8)[:, :, ::-1]
    if not cv2.imwrite(path, bgr):
        raise InputError(f"could not write image {path}")


def read_frame_png(path: str) -> np.ndarray:
    bgr = cv2.imread(path, cv2.IMREAD_COLOR)
    if bgr is None:
        raise FormatError(f"could not read image {path}")
    return bgr[:, :, ::-1].astype(np.float32) / 255.0


def write_video(
    root: str,
    video_id: str,
    frames: Sequence[Frame],
    gts: Optional[Sequence[GroundTruth]] = None,
) -> None:
    """Write frames (and ground-truth masks when any frame is abnormal)."""
    frame_dir = os.path.join(root, video_id, FRAME_DIR)
    os.makedirs(frame_dir, exist_ok=True)
    for frame in frames:
        write_frame_png(os.path.join(frame_dir, _frame_name(frame.index)), frame.pixels)
    if gts is not None and any(gt.frame_label for gt in gts):
        gt_dir = os.path.join(root, video_id, GT_DIR)
        os.makedirs(gt_dir, exist_ok=True)
        for frame, gt in zip(frames, gts):
            mask = (
                gt.pixel_mask
                if gt.pixel_mask is not None
                else np.zeros(frame.pixels.shape[:2], dtype=bool)
            )
            path = os.path.join(gt_dir, _frame_name(frame.index))
            if not cv2.imwrite(path, mask.astype(np.uint8) * 255):
                raise InputError(f"could not write mask {path}")


def write_flows(root: str, video_id: str, flows: Sequence[FlowImage]) -> None:
    flow_dir = os.path.join(root, video_id, FLOW_DIR)
    os.makedirs(flow_dir, exist_ok=True)
    for flow in flows:
        save_flow(os.path.join(flow_dir, f"{flow.index:06d}.flo"), flow)


def read_frames(root: str, video_id: str, resolution: Optional[int] = None) -> list[Frame]:
    """All frames of one video, optionally rescaled to a working resolution."""
    frame_dir = os.path.join(root, video_id, FRAME_DIR)
    if not os.path.isdir(frame_dir):
        raise InputError(f"{frame_dir} is not a directory")
    entries = _indexed_files(frame_dir, ".png")
    if not entries:
        raise InputError(f"no frames under {frame_dir}")
    frames = []
    for index, path in entries:
        pixels = read_frame_png(path)
        if resolution is not None:
            frames.append(rescale_frame(pixels, index, video_id, resolution))
        else:
            frames.append(Frame(pixels=pixels, index=index, video_id=video_id))
    return frames


def read_flows(
    root: str, video_id: str, max_displacement: float
) -> Optional[list[FlowImage]]:
    """Precomputed flow files for one video, or None when absent."""
    flow_dir = os.path.join(root, video_id, FLOW_DIR)
    if not os.path.isdir(flow_dir):
        return None
    return [
        load_precomputed_flow(
            path, index=index, video_id=video_id, max_displacement=max_displacement
        )
        for index, path in _indexed_files(flow_dir, ".flo")
    ]


def _read_mask(path: str, shape: tuple[int, int]) -> np.ndarray:
    raw = cv2.imread(path, cv2.IMREAD_GRAYSCALE)
    if raw is None:
        raise FormatError(f"could not read mask {path}")
    if raw.shape != shape:
        raw = cv2.resize(raw, (shape[1], shape[0]), interpolation=cv2.INTER_NEAREST)
    return raw > 0


def read_gts(
    root: str, video_id: str, indices: Sequence[int], shape: tuple[int, int]
) -> list[GroundTruth]:
    """Ground truth per frame index; missing files mean the frame is normal."""
    gt_dir = os.path.join(root, video_id, GT_DIR)
    empty = np.zeros(shape, dtype=bool)
    out = []
    for index in indices:
        path = os.path.join(gt_dir, _frame_name(index))
        if os.path.isfile(path):
            mask = _read_mask(path, shape)
        else:
            mask = empty
        out.append(GroundTruth(frame_label=bool(mask.any()), pixel_mask=mask))
    return out


def write_maps(maps_root: str, video_id: str, maps: Sequence[AbnormalityMap]) -> None:
    """Quantized abnormality maps plus the per-frame maximum index file."""
    out_dir = os.path.join(maps_root, video_id)
    os.makedirs(out_dir, exist_ok=True)
    indices, maxima = [], []
    for m in maps:
        quantized = np.round(m.values * MAP_SCALE).astype(np.uint16)
        path = os.path.join(out_dir, _frame_name(m.index))
        if not cv2.imwrite(path, quantized):
            raise InputError(f"could not write map {path}")
        indices.append(int(m.index))
        maxima.append(float(quantized.max()) / MAP_SCALE)
    with open(os.path.join(out_dir, SCORES_FILE), "w") as fh:
        json.dump(
            {"video_id": video_id, "indices": indices, "per_frame_max": maxima},
            fh,
            indent=1,
        )


def list_map_videos(maps_root: str) -> list[str]:
    """Video ids under a detection-output root (directories with scores.json)."""
    if not os.path.isdir(maps_root):
        raise InputError(f"maps root {maps_root} is not a directory")
    ids = [
        name
        for name in sorted(os.listdir(maps_root))
        if os.path.isfile(os.path.join(maps_root, name, SCORES_FILE))
    ]
    if not ids:
        raise InputError(f"no detection outputs found under {maps_root}")
    return ids


def read_maps(maps_root: str, video_id: str) -> tuple[list[np.ndarray], list[int]]:
    """(map values, frame indices) for one video's detection output."""
    out_dir = os.path.join(maps_root, video_id)
    with open(os.path.join(out_dir, SCORES_FILE)) as fh:
        scores = json.load(fh)
    maps, indices = [], []
    for index in scores["indices"]:
        path = os.path.join(out_dir, _frame_name(index))
        raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
        if raw is None:
            raise FormatError(f"could not read map {path}")
        maps.append(raw.astype(np.float64) / MAP_SCALE)
        indices.append(int(index))
    return maps, indices


def write_report(path: str, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
