"""Shared fixtures: a tiny synthetic scene and a pair of briefly trained tasks.

The trained fixtures run at 32px with narrow networks so the whole suite
stays fast; anything about detection quality is exercised separately by the
acceptance tests at the full desk scale.
"""

import numpy as np
import pytest
import torch

from crowdgan.data import Direction, build_pairs
from crowdgan.flow import FlowConfig, compute_flow
from crowdgan.synthetic import AnomalyKind, SceneSpec, generate_abnormal_video, generate_normal_video
from crowdgan.training import TrainConfig, train_task

torch.set_num_threads(1)

TINY_RES = 32
TINY_BASE_FILTERS = 4


@pytest.fixture(scope="session")
def tiny_spec():
    return SceneSpec(
        resolution=TINY_RES,
        agent_count=2,
        agent_size=3.0,
        frames_per_video=24,
        seed=11,
    )


@pytest.fixture(scope="session")
def tiny_normal(tiny_spec):
    """(frames, gts, flows) of one normal tiny video."""
    frames, gts = generate_normal_video(tiny_spec, video_id="tiny-norm")
    flows = [
        compute_flow(frames[i], frames[i + 1], FlowConfig())
        for i in range(len(frames) - 1)
    ]
    return frames, gts, flows


@pytest.fixture(scope="session")
def tiny_abnormal(tiny_spec):
    """(frames, gts, flows) of one abnormal tiny video (fast object)."""
    spec = SceneSpec(
        resolution=TINY_RES,
        agent_count=2,
        agent_size=3.0,
        frames_per_video=24,
        seed=12,
        anomaly_kind=AnomalyKind.FAST_OBJECT,
    )
    frames, gts = generate_abnormal_video(spec, video_id="tiny-abn")
    flows = [
        compute_flow(frames[i], frames[i + 1], FlowConfig())
        for i in range(len(frames) - 1)
    ]
    return frames, gts, flows


@pytest.fixture(scope="session")
def trained_tasks(tiny_normal):
    """Both translation directions trained for two epochs on the tiny video."""
    frames, _, flows = tiny_normal
    cfg = TrainConfig(epochs=2, seed=5)
    tasks = {}
    for direction in (Direction.FRAME_TO_FLOW, Direction.FLOW_TO_FRAME):
        pairs = build_pairs(frames, flows, direction)
        tasks[direction] = train_task(pairs, cfg, base_filters=TINY_BASE_FILTERS)
    return tasks


@pytest.fixture(scope="session")
def task_fo(trained_tasks):
    return trained_tasks[Direction.FRAME_TO_FLOW]


@pytest.fixture(scope="session")
def task_of(trained_tasks):
    return trained_tasks[Direction.FLOW_TO_FRAME]


@pytest.fixture()
def rng():
    return np.random.default_rng(202)
