"""Cross-implementation conformance: the training engine's HTTP client
against this reference server must reproduce in-process scripted-teacher
actions, and a full training run through the remote teacher must land
where the local-teacher run lands.
"""

import threading

import numpy as np
import pytest

from rpd.envs import EnvSpec
from rpd.losses import LossConfig
from rpd.teacher import (RemoteTeacher, ScriptedTeacher as EngineTeacher,
                         ScriptedTeacherSpec, TeacherQuery, remote_act)
from rpd.trainer import (ExperimentConfig, TeacherSettings, teacher_eval, train)

from teacher_server.policy import ScriptedTeacher as ReferenceTeacher
from teacher_server.server import serve


@pytest.fixture(scope="module")
def served():
    spec = dict(competence=0.7, action_noise_std=0.05, seed=42)
    reference = ReferenceTeacher("Push2D", **spec)
    engine_local = EngineTeacher(
        "Push2D",
        ScriptedTeacherSpec(competence=spec["competence"],
                            action_noise_std=spec["action_noise_std"]),
        seed=spec["seed"])
    server = serve(0, reference)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    endpoint = f"http://127.0.0.1:{server.server_address[1]}"
    yield endpoint, engine_local
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def test_thousand_queries_match_within_wire_tolerance(served):
    endpoint, local = served
    rng = np.random.default_rng(123)
    worst = 0.0
    for i in range(1000):
        batch = int(rng.integers(1, 5))
        obs = rng.uniform(-1, 1, (batch, 8))
        k = 10 if i % 2 else 1
        mine = local.act(obs, k).actions
        theirs = remote_act(endpoint, TeacherQuery(obs, "push the cube", k)).actions
        worst = max(worst, float(np.max(np.abs(mine - theirs))))
    assert worst <= 1e-12


def test_teacher_eval_identical_through_server(served):
    endpoint, local = served
    spec = EnvSpec(task="Push2D", reward_mode="sparse")
    assert teacher_eval(RemoteTeacher(endpoint, "push"), spec, 200, 7) == \
        teacher_eval(local, spec, 200, 7)


@pytest.mark.slow
def test_sparse_training_through_remote_teacher_matches_local(served):
    endpoint, _ = served
    common = dict(task="Push2D", reward_mode="sparse", hidden_sizes=(64, 64),
                  loss=LossConfig(variant="rpd_mse"), total_steps=300_000,
                  minibatch_size=200, epochs=8, eval_interval=5,
                  eval_episodes=100, teacher_eval_episodes=100, seed=0)
    local_cfg = ExperimentConfig(
        teacher=TeacherSettings(kind="scripted", competence=0.7,
                                action_noise_std=0.05, seed=42), **common)
    remote_cfg = ExperimentConfig(
        teacher=TeacherSettings(kind="remote", endpoint=endpoint,
                                instruction="push the cube"), **common)
    local_run = train(local_cfg)
    remote_run = train(remote_cfg)

    def final_quarter(res):
        succ = [m.eval_success for m in res.metrics]
        return float(np.mean(succ[-(len(succ) // 4):]))

    assert final_quarter(remote_run) == pytest.approx(final_quarter(local_run),
                                                      abs=0.10)
