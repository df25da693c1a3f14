"""Framed control protocol for external learners.

Wire format: a 4-byte big-endian length prefix followed by a UTF-8 JSON
body. Requests carry {"cmd": "reset"|"step"|"close", ...}; every request
gets exactly one response. Image observations travel as base64-encoded raw
bytes in slot-major, row-major order, one byte per pixel; precise vectors
travel as JSON float lists. One episode stream per connection, served
sequentially; the server trusts its single local client.
"""
from __future__ import annotations

import base64
import json
import socket
import struct
import sys

import numpy as np

from .configio import config_from_dict, load_config
from .env import Episode
from .observe import LayoutError

MAX_FRAME = 64 * 1024 * 1024


class ProtocolError(ValueError):
    pass


def encode_frame(obj: dict) -> bytes:
    body = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    return struct.pack(">I", len(body)) + body


def read_frame(read_exact) -> dict | None:
    """Decode one frame; None on clean EOF at a frame boundary."""
    header = read_exact(4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    body = read_exact(length)
    if body is None:
        raise ProtocolError("connection closed mid-frame")
    try:
        return json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed frame body: {exc}") from exc


def encode_observation(obs: np.ndarray) -> dict:
    if obs.dtype == np.uint8:
        return {
            "kind": "image",
            "shape": list(obs.shape),
            "dtype": "uint8",
            "data_b64": base64.b64encode(obs.tobytes()).decode("ascii"),
        }
    return {"kind": "vector", "data": [float(x) for x in obs]}


class EpisodeSession:
    """Maps protocol commands onto one Episode at a time."""

    def __init__(self):
        self.episode: Episode | None = None

    def handle(self, msg: dict) -> tuple[dict, bool]:
        """Returns (response, keep_going)."""
        if not isinstance(msg, dict) or "cmd" not in msg:
            return {"ok": False, "error": "message must carry a 'cmd' field"}, True
        cmd = msg["cmd"]
        try:
            if cmd == "reset":
                return self._reset(msg), True
            if cmd == "step":
                return self._step(msg), True
            if cmd == "close":
                self.episode = None
                return {"ok": True}, False
            return {"ok": False, "error": f"unknown cmd {cmd!r}"}, True
        except (LayoutError, ValueError, KeyError, FileNotFoundError) as exc:
            return {"ok": False, "error": str(exc)}, True

    def _reset(self, msg: dict) -> dict:
        cfg_field = msg.get("config")
        if isinstance(cfg_field, str):
            config = load_config(cfg_field)
        elif isinstance(cfg_field, dict):
            config = config_from_dict(cfg_field)
        else:
            return {"ok": False, "error": "reset needs 'config' (name, path, or mapping)"}
        if "seed" in msg and msg["seed"] is not None:
            from dataclasses import replace

            config = replace(config, seed=int(msg["seed"]))
        self.episode = Episode(config, record_states=False)
        obs = self.episode.reset()
        return {
            "ok": True,
            "obs": encode_observation(obs),
            "spaces": {
                "action": {
                    "kind": config.action.kind,
                    "low": config.action.lower,
                    "high": config.action.upper,
                    "slots": config.action_slots,
                },
                "observation": {
                    "mode": config.obs.mode,
                    "shape": list(self.episode.observation_shape),
                },
            },
            "info": {"env": config.env_kind, "seed": config.seed},
        }

    def _step(self, msg: dict) -> dict:
        if self.episode is None:
            return {"ok": False, "error": "step before reset"}
        actions = msg.get("actions")
        if actions is None:
            return {"ok": False, "error": "step needs 'actions'"}
        expected = self.episode.config.action_slots
        if len(actions) != expected:
            return {
                "ok": False,
                "error": f"expected {expected} actions, got {len(actions)}",
                "expected_arity": expected,
            }
        result = self.episode.step(np.asarray(actions, dtype=float))
        return {
            "ok": True,
            "obs": encode_observation(result.observation),
            "reward": result.reward,
            "done": result.done,
            "info": result.info,
        }


def serve_stream(recv_exact, send) -> None:
    """Serve one connection until close/EOF; bad frames get error responses."""
    session = EpisodeSession()
    while True:
        try:
            msg = read_frame(recv_exact)
        except ProtocolError as exc:
            send(encode_frame({"ok": False, "error": str(exc)}))
            if "mid-frame" in str(exc):
                return
            continue
        if msg is None:
            return
        response, keep_going = session.handle(msg)
        send(encode_frame(response))
        if not keep_going:
            return


def _sock_reader(conn: socket.socket):
    def recv_exact(n: int) -> bytes | None:
        chunks = b""
        while len(chunks) < n:
            part = conn.recv(n - len(chunks))
            if not part:
                return None
            chunks += part
        return chunks

    return recv_exact


def serve_tcp(host: str = "127.0.0.1", port: int = 0, max_connections: int | None = None,
              ready_callback=None) -> None:
    """Accept connections sequentially, one episode stream each."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, port))
        server.listen(1)
        if ready_callback is not None:
            ready_callback(server.getsockname()[1])
        served = 0
        while max_connections is None or served < max_connections:
            conn, _ = server.accept()
            with conn:
                serve_stream(_sock_reader(conn), conn.sendall)
            served += 1


def serve_stdio() -> None:
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer

    def recv_exact(n: int) -> bytes | None:
        data = stdin.read(n)
        if not data:
            return None
        while len(data) < n:
            more = stdin.read(n - len(data))
            if not more:
                return None
            data += more
        return data

    def send(payload: bytes) -> None:
        stdout.write(payload)
        stdout.flush()

    serve_stream(recv_exact, send)


class ProtocolClient:
    """Minimal in-process client used by tests and the CLI."""

    def __init__(self, host: str, port: int):
        self.sock = socket.create_connection((host, port))
        self._recv = _sock_reader(self.sock)

    def request(self, msg: dict) -> dict:
        self.sock.sendall(encode_frame(msg))
        response = read_frame(self._recv)
        if response is None:
            raise ProtocolError("server closed the connection")
        return response

    def close(self) -> None:
        try:
            self.request({"cmd": "close"})
        except (OSError, ProtocolError):
            pass
        self.sock.close()


def decode_observation(payload: dict) -> np.ndarray:
    if payload["kind"] == "image":
        raw = base64.b64decode(payload["data_b64"])
        return np.frombuffer(raw, dtype=np.uint8).reshape(payload["shape"])
    return np.array(payload["data"], dtype=float)
