"""Byte-stream bridge for policies living in another process.

A bridge child speaks newline-delimited JSON over stdin/stdout: one
request line in, one response line out, in lockstep.  Every message
carries a version tag.

Request::

    {"bin": [L, W, H],
     "height_map": [...],       # L*W ints, row-major (x outer, y inner)
     "items": [[l, w, h], ...], # the visible buffer, front item first
     "mask": [[...], ...],      # one row-major 0/1 grid per orientation
     "v": 1}

Response::

    {"action": <flat action id>, "v": 1}

The action id addresses the flat action space (see `Action.flat_index`);
a response that is not feasible under the request's mask is rejected,
never corrected.  The handle owns its child exclusively and keeps one
request in flight at a time; share it across threads only behind a lock
of your own.
"""

from __future__ import annotations

import json
import os
import select
import subprocess
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from binpack3d.core import (
    Action,
    BinConfig,
    BOTH_ORIENTATIONS,
    DEFAULT_ORIENTATIONS,
    EpisodeState,
    FeasibilityMask,
    HeightMap,
    Item,
    NoFeasibleAction,
    PackingError,
)
from binpack3d.policies import PolicyDecision

PROTOCOL_VERSION = 1


class ExternalPolicyError(PackingError):
    """Base class for everything that can go wrong across the bridge."""


class ProcessDied(ExternalPolicyError):
    """The child exited (or was never startable)."""


class ResponseTimeout(ExternalPolicyError):
    """No complete response line arrived within the deadline."""


class ProtocolError(ExternalPolicyError):
    """The child sent something that is not a valid response message."""


class InfeasibleResponse(ExternalPolicyError):
    """The child answered with a mask-false action."""


def _canonical_line(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode() + b"\n"


@dataclass(frozen=True)
class ExternalRequest:
    """One decision request, convertible to and from its wire line."""

    bin: BinConfig
    height_map: HeightMap
    items: tuple[Item, ...]
    mask: FeasibilityMask

    @classmethod
    def from_state(cls, state: EpisodeState, mask: FeasibilityMask) -> "ExternalRequest":
        if state.current_item is None:
            raise ValueError("no current item to request a decision for")
        if state.orientations not in (DEFAULT_ORIENTATIONS, BOTH_ORIENTATIONS):
            raise ValueError(
                "the bridge protocol indexes mask grids by orientation id; "
                f"orientations {state.orientations} are not expressible"
            )
        return cls(
            bin=state.bin,
            height_map=state.height_map,
            items=state.buffer,
            mask=mask,
        )

    def to_line(self) -> bytes:
        payload = {
            "v": PROTOCOL_VERSION,
            "bin": [self.bin.L, self.bin.W, self.bin.H],
            "height_map": [int(v) for v in self.height_map.grid.ravel(order="C")],
            "items": [[item.l, item.w, item.h] for item in self.items],
            "mask": [
                [int(v) for v in grid.ravel(order="C")] for grid in self.mask.grids
            ],
        }
        return _canonical_line(payload)

    @classmethod
    def parse(cls, line: bytes | str) -> "ExternalRequest":
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"request is not valid JSON: {exc}") from None
        if not isinstance(payload, dict) or payload.get("v") != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported request version {payload!r}")
        try:
            L, W, H = (int(v) for v in payload["bin"])
            bin = BinConfig(L, W, H)
            grid = np.array(payload["height_map"], dtype=np.int64).reshape(L, W)
            height_map = HeightMap(grid, bin)
            items = tuple(Item(int(l), int(w), int(h)) for l, w, h in payload["items"])
            raw_mask = payload["mask"]
            if len(raw_mask) == 1:
                orientations = DEFAULT_ORIENTATIONS
            elif len(raw_mask) == 2:
                orientations = BOTH_ORIENTATIONS
            else:
                raise ProtocolError(f"mask must hold 1 or 2 grids, got {len(raw_mask)}")
            grids = np.array(raw_mask, dtype=np.int64).reshape(len(raw_mask), L, W)
            mask = FeasibilityMask(bin, orientations, grids.astype(bool))
        except ProtocolError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed request: {exc}") from None
        return cls(bin=bin, height_map=height_map, items=items, mask=mask)


def encode_response(action_index: int) -> bytes:
    return _canonical_line({"v": PROTOCOL_VERSION, "action": int(action_index)})


def parse_response(line: bytes | str) -> int:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"response is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ProtocolError(f"response must be an object, got {type(payload).__name__}")
    if payload.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported response version {payload.get('v')!r}")
    action = payload.get("action")
    if isinstance(action, bool) or not isinstance(action, int):
        raise ProtocolError(f"response action must be an integer, got {action!r}")
    return action


class ExternalPolicy:
    """Run placements through a child process speaking the bridge protocol.

    The child is spawned on first use and fed one request per decision.
    Any fatal condition (death, timeout, garbage) closes the bridge; the
    handle stays closed afterwards.  Use as a context manager or call
    `close` when done.
    """

    def __init__(self, command: Sequence[str], *, timeout: float = 10.0,
                 name: str = "external"):
        if timeout <= 0:
            raise ValueError(f"timeout must be positive, got {timeout}")
        self.command = tuple(command)
        self.timeout = float(timeout)
        self.name = name
        self._proc: subprocess.Popen | None = None
        self._buffer = bytearray()
        self._closed = False

    # -- lifecycle ---------------------------------------------------------

    def _ensure_running(self) -> subprocess.Popen:
        if self._closed:
            raise ProcessDied("bridge is closed")
        if self._proc is None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                )
            except OSError as exc:
                self._closed = True
                raise ProcessDied(f"could not start {self.command[0]}: {exc}") from None
        return self._proc

    def close(self) -> None:
        self._closed = True
        proc, self._proc = self._proc, None
        if proc is None:
            return
        for stream in (proc.stdin, proc.stdout):
            if stream:
                stream.close()
        if proc.poll() is None:
            proc.terminate()
            try:
                proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    def __enter__(self) -> "ExternalPolicy":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # -- one decision ------------------------------------------------------

    def __call__(self, state: EpisodeState, mask: FeasibilityMask) -> PolicyDecision:
        if not mask.any():
            raise NoFeasibleAction("external policy: no feasible anchor")
        request = ExternalRequest.from_state(state, mask)
        proc = self._ensure_running()
        try:
            proc.stdin.write(request.to_line())
            proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self.close()
            raise ProcessDied(f"child exited with code {proc.poll()}") from None
        line = self._read_line(proc)
        action_index = parse_response(line)
        span = len(mask.orientations) * state.bin.floor_cells
        if not 0 <= action_index < span:
            self.close()
            raise ProtocolError(
                f"action {action_index} outside the flat action space [0, {span})"
            )
        action = Action.from_flat(action_index, state.bin)
        if not mask.allows(action):
            self.close()
            raise InfeasibleResponse(f"action {action_index} is mask-false")
        return PolicyDecision(action=action)

    def _read_line(self, proc: subprocess.Popen) -> bytes:
        fd = proc.stdout.fileno()
        deadline = time.monotonic() + self.timeout
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.close()
                raise ResponseTimeout(f"no response within {self.timeout:.3f}s")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                code = proc.poll()
                self.close()
                raise ProcessDied(f"child exited with code {code} mid-conversation")
            self._buffer.extend(chunk)
        line, _, rest = bytes(self._buffer).partition(b"\n")
        self._buffer = bytearray(rest)
        return line
