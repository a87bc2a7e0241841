import json
import threading
import urllib.error
import urllib.request

import pytest

from teacher_server.policy import ScriptedTeacher, hash_normals, hash_uniforms
from teacher_server.server import load_config, serve


@pytest.fixture()
def running_server():
    teacher = ScriptedTeacher("Push2D", competence=0.8, action_noise_std=0.05,
                              seed=9)
    server = serve(0, teacher)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    endpoint = f"http://127.0.0.1:{server.server_address[1]}"
    yield endpoint
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def post_act(endpoint, payload):
    req = urllib.request.Request(
        endpoint + "/v1/act", data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req, timeout=5) as resp:
        return json.loads(resp.read())


def test_health(running_server):
    with urllib.request.urlopen(running_server + "/v1/health", timeout=5) as resp:
        assert json.loads(resp.read()) == {"status": "ok", "act_dim": 3}


def test_act_shape_contract(running_server):
    payload = {"observations": [[0.0] * 8, [0.1] * 8], "instruction": "push",
               "sample_count": 10}
    actions = post_act(running_server, payload)["actions"]
    assert len(actions) == 2
    assert len(actions[0]) == 10
    assert len(actions[0][0]) == 3


def test_empty_batch_rejected(running_server):
    req = urllib.request.Request(
        running_server + "/v1/act",
        data=json.dumps({"observations": [], "sample_count": 1}).encode(),
        headers={"Content-Type": "application/json"})
    with pytest.raises(urllib.error.HTTPError) as err:
        urllib.request.urlopen(req, timeout=5)
    assert err.value.code == 400
    assert "error" in json.loads(err.value.read())


def test_malformed_body_rejected(running_server):
    req = urllib.request.Request(running_server + "/v1/act", data=b"oops",
                                 headers={"Content-Type": "application/json"})
    with pytest.raises(urllib.error.HTTPError) as err:
        urllib.request.urlopen(req, timeout=5)
    assert err.value.code == 400


def test_unknown_path(running_server):
    with pytest.raises(urllib.error.HTTPError) as err:
        urllib.request.urlopen(running_server + "/v2/act", timeout=5)
    assert err.value.code == 404


def test_requests_are_stateless(running_server):
    payload = {"observations": [[0.2] * 8], "sample_count": 3}
    first = post_act(running_server, payload)
    second = post_act(running_server, payload)
    assert first == second


def test_full_float_precision_round_trip(running_server):
    obs = [[0.1 + 1e-16, -0.4999999999999999, 0.3, 0.0, 0.25, -0.125,
            0.7000000000000001, 0.2]]
    a = post_act(running_server, {"observations": obs, "sample_count": 1})
    b = post_act(running_server, {"observations": obs, "sample_count": 1})
    assert a == b
    assert all(isinstance(x, float) for x in a["actions"][0][0])


def test_config_loading(tmp_path):
    path = tmp_path / "server.json"
    path.write_text(json.dumps({
        "port": 8123, "act_dim": 7, "seed": 11,
        "teacher": {"kind": "scripted", "task": "Pull2D", "competence": 0.5}}))
    port, teacher = load_config(str(path))
    assert port == 8123
    assert teacher.act_dim == 7 and teacher.seed == 11
    assert teacher.task == "Pull2D"


def test_config_requires_task(tmp_path):
    path = tmp_path / "server.json"
    path.write_text(json.dumps({"teacher": {"kind": "scripted"}}))
    with pytest.raises(ValueError):
        load_config(str(path))


def test_hash_streams_are_deterministic():
    assert hash_uniforms(b"key", 4) == hash_uniforms(b"key", 4)
    assert hash_uniforms(b"key", 4) != hash_uniforms(b"yek", 4)
    z = hash_normals(b"key", 1001)
    assert len(z) == 1001
    mean = sum(z) / len(z)
    assert abs(mean) < 0.1


def test_teacher_validates_inputs():
    teacher = ScriptedTeacher("Push2D", seed=0)
    with pytest.raises(ValueError):
        teacher.act([], 1)
    with pytest.raises(ValueError):
        teacher.act([[0.0] * 6], 1)  # prefix too short for push
    with pytest.raises(ValueError):
        ScriptedTeacher("Fly2D")
    with pytest.raises(ValueError):
        ScriptedTeacher("Push2D", competence=1.5)
