import struct
import threading

import numpy as np
import pytest

from mixedtraffic import protocol
from mixedtraffic.configio import config_to_dict
from mixedtraffic.env import Episode, default_config


def quick_cfg(seed=0):
    return default_config(
        "ring", seed=seed, warmup=80, horizon=600, network={"circumference": 230.0}
    )


@pytest.fixture()
def server():
    holder = {}
    ready = threading.Event()
    thread = threading.Thread(
        target=protocol.serve_tcp,
        kwargs=dict(
            port=0,
            max_connections=1,
            ready_callback=lambda p: (holder.update(port=p), ready.set()),
        ),
        daemon=True,
    )
    thread.start()
    assert ready.wait(10)
    yield holder["port"]
    thread.join(timeout=5)


class TestFraming:
    def test_frame_roundtrip(self):
        frame = protocol.encode_frame({"cmd": "close"})
        (length,) = struct.unpack(">I", frame[:4])
        assert length == len(frame) - 4
        chunks = [frame]

        def reader(n):
            data = chunks[0][:n]
            chunks[0] = chunks[0][n:]
            return data

        assert protocol.read_frame(reader) == {"cmd": "close"}

    def test_observation_codecs(self):
        img = (np.arange(84 * 84) % 256).astype(np.uint8).reshape(1, 84, 84)
        enc = protocol.encode_observation(img)
        assert enc["kind"] == "image"
        assert np.array_equal(protocol.decode_observation(enc), img)
        vec = np.array([1.5, -2.0, 0.25])
        enc = protocol.encode_observation(vec)
        assert enc["kind"] == "vector"
        assert np.array_equal(protocol.decode_observation(enc), vec)


class TestSession:
    def test_reset_step_shapes(self, server):
        client = protocol.ProtocolClient("127.0.0.1", server)
        resp = client.request({"cmd": "reset", "config": config_to_dict(quick_cfg())})
        assert resp["ok"]
        obs = protocol.decode_observation(resp["obs"])
        assert obs.shape == (1, 84, 84)
        assert len(obs.tobytes()) == 7056
        assert resp["spaces"]["action"]["slots"] == 1
        step = client.request({"cmd": "step", "actions": [0.0]})
        assert step["ok"] and isinstance(step["reward"], float)
        client.close()

    def test_wrong_arity_names_expected(self, server):
        client = protocol.ProtocolClient("127.0.0.1", server)
        client.request({"cmd": "reset", "config": config_to_dict(quick_cfg())})
        resp = client.request({"cmd": "step", "actions": [0.0, 0.0]})
        assert not resp["ok"]
        assert resp["expected_arity"] == 1
        assert "expected 1" in resp["error"]
        client.close()

    def test_step_before_reset(self, server):
        client = protocol.ProtocolClient("127.0.0.1", server)
        resp = client.request({"cmd": "step", "actions": [0.0]})
        assert not resp["ok"] and "reset" in resp["error"]
        client.close()

    def test_malformed_frame_connection_survives(self, server):
        client = protocol.ProtocolClient("127.0.0.1", server)
        bad = b"{not json"
        client.sock.sendall(struct.pack(">I", len(bad)) + bad)
        resp = protocol.read_frame(client._recv)
        assert not resp["ok"] and "malformed" in resp["error"]
        ok = client.request({"cmd": "reset", "config": config_to_dict(quick_cfg())})
        assert ok["ok"]
        client.close()

    def test_builtin_config_by_name(self, server):
        client = protocol.ProtocolClient("127.0.0.1", server)
        resp = client.request({"cmd": "reset", "config": "bottleneck_2300", "seed": 1})
        assert resp["ok"]
        assert resp["spaces"]["action"] == {
            "kind": "velocity", "low": 0.01, "high": 23.0, "slots": 15,
        }
        obs = protocol.decode_observation(resp["obs"])
        assert obs.shape == (15, 84, 84)
        client.close()


class TestCrossInterfaceEquivalence:
    def test_scripted_replay_matches_in_process(self, server):
        cfg = quick_cfg(seed=11)
        actions = [0.5 * np.sin(k / 25.0) for k in range(120)]

        ep = Episode(cfg, record_states=False)
        obs_local = [ep.reset()]
        rewards_local = []
        for a in actions:
            res = ep.step(np.array([a]))
            rewards_local.append(res.reward)
            obs_local.append(res.observation)

        client = protocol.ProtocolClient("127.0.0.1", server)
        resp = client.request({"cmd": "reset", "config": config_to_dict(cfg)})
        obs_remote = [protocol.decode_observation(resp["obs"]).reshape(1, 84, 84)]
        rewards_remote = []
        for a in actions:
            r = client.request({"cmd": "step", "actions": [float(a)]})
            rewards_remote.append(r["reward"])
            obs_remote.append(protocol.decode_observation(r["obs"]).reshape(1, 84, 84))
        client.close()

        assert rewards_local == rewards_remote
        for a, b in zip(obs_local, obs_remote):
            assert np.array_equal(a, b)
