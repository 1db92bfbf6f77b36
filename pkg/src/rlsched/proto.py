"""Newline-delimited JSON protocol for driving an environment from another
process (the `serve` CLI subcommand hosts it; a thin client lives here too).

One JSON object per line, UTF-8.  Requests:
    {"op": "spec" | "reset" | "step" | "close", "id": int?, "seed": int?, "action": int?}
Responses always echo the request id (server-assigned, monotonically
increasing, when the request carries none) and either an "error" string or
the op's payload.  Observations travel as a flat number list plus shape;
floats are serialized with Python repr semantics (shortest decimal that
round-trips the exact IEEE-754 double, never more than 17 significant
digits), so values survive the wire bit-exactly.
"""

from __future__ import annotations

import json
import subprocess
from typing import IO, Optional

import numpy as np

from .env import EnvConfig, InvalidActionError, SchedulingEnv

PROTOCOL_VERSION = "v1"


class ProtocolError(RuntimeError):
    """Client-side: the server answered with an error or broke the framing."""


def _spec_payload(config: EnvConfig) -> dict:
    return {
        "version": PROTOCOL_VERSION,
        "observation_shape": list(config.observation_shape),
        "n_actions": config.n_actions,
        "variant": {
            "rep": config.representation,
            "trans": config.transitions,
            "rew": "all" if config.reward_scope == "all_jobs" else "window",
            "W": config.W,
            "H": config.H,
            "T": config.T,
            "scenario": config.scenario.id,
        },
    }


def _obs_payload(obs: np.ndarray) -> dict:
    return {"observation": obs.ravel().tolist(), "shape": list(obs.shape)}


def serve(env: SchedulingEnv, infile: IO[bytes], outfile: IO[bytes]) -> None:
    """Serve one client session until `close` or EOF.

    Malformed JSON and bad requests produce error responses; the loop keeps
    running so a client mistake never kills the session.
    """
    next_id = 0
    has_reset = False
    for raw in infile:
        line = raw.strip()
        if not line:
            continue
        next_id += 1
        rid = next_id
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
            if "id" in request:
                rid = int(request["id"])
                next_id = rid
            op = request.get("op")
            if op == "spec":
                response = {"id": rid, **_spec_payload(env.config)}
            elif op == "reset":
                obs = env.reset(seed=request.get("seed"))
                has_reset = True
                response = {"id": rid, **_obs_payload(obs), "reward": 0.0, "done": False, "info": {}}
            elif op == "step":
                if not has_reset:
                    raise ValueError("reset required before step")
                if env.done:
                    raise ValueError("episode finished")
                if "action" not in request:
                    raise ValueError("step requires an action")
                obs, reward, done, info = env.step(int(request["action"]))
                response = {
                    "id": rid, **_obs_payload(obs),
                    "reward": reward, "done": done, "info": info,
                }
            elif op == "close":
                _write(outfile, {"id": rid, "ok": True})
                return
            else:
                raise ValueError(f"unknown op {op!r}")
        except (ValueError, KeyError, TypeError, InvalidActionError, RuntimeError) as exc:
            response = {"id": rid, "error": str(exc)}
        _write(outfile, response)


def _write(outfile: IO[bytes], payload: dict) -> None:
    outfile.write(json.dumps(payload).encode("utf-8") + b"\n")
    outfile.flush()


class ProtoClient:
    """Spawn a serve subprocess and expose reset/step over its stdio.

    Request ids increase monotonically and every response must echo the id it
    answers; any mismatch or error response raises ProtocolError.
    """

    def __init__(self, argv: list[str]):
        self._proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        self._next_id = 0
        self._spec: Optional[dict] = None

    def request(self, payload: dict) -> dict:
        self._next_id += 1
        payload = {"id": self._next_id, **payload}
        self._proc.stdin.write(json.dumps(payload).encode("utf-8") + b"\n")
        self._proc.stdin.flush()
        raw = self._proc.stdout.readline()
        if not raw:
            raise ProtocolError("server closed the connection")
        response = json.loads(raw)
        if response.get("id") != self._next_id:
            raise ProtocolError(f"response id {response.get('id')} != request id {self._next_id}")
        if "error" in response:
            raise ProtocolError(response["error"])
        return response

    def spec(self) -> dict:
        self._spec = self.request({"op": "spec"})
        return self._spec

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        payload: dict = {"op": "reset"}
        if seed is not None:
            payload["seed"] = seed
        response = self.request(payload)
        return self._decode_obs(response)

    def step(self, action: int):
        response = self.request({"op": "step", "action": action})
        return self._decode_obs(response), response["reward"], response["done"], response["info"]

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self.request({"op": "close"})
            except ProtocolError:
                pass
            self._proc.stdin.close()
            self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @staticmethod
    def _decode_obs(response: dict) -> np.ndarray:
        return np.array(response["observation"], dtype=np.float64).reshape(response["shape"])
