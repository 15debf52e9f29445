"""Wire-protocol client for external classifier backends.

The protocol is newline-delimited JSON over a byte stream, version "1":

- handshake: client sends {"op": "hello", "version": "1"}; the server
  replies {"op": "hello", "version": "1", "classes": [...],
  "chip_size": N, "single_consumer": bool}
- request:  {"op": "classify", "id": uint64, "width": N, "height": N,
  "channels": 3, "pixels": "<base64 row-major 8-bit RGB>"}
- response: {"op": "result", "id": uint64, "probs": [p0, ..., pk]}
- error:    {"op": "error", "id": uint64, "message": text}

Requests may be pipelined and responses may arrive out of order; they are
matched by id.
"""

from __future__ import annotations

import base64
import json
import socket
from collections import deque
from typing import Sequence

import numpy as np

from ._validation import check_probabilities
from .backends import ClassifierBackend
from .chips import Chip
from .errors import HandshakeError, ProtocolError, TransportError
from .taxonomy import FALSE_DETECTION_NAME, ClassLabel, Taxonomy

PROTOCOL_VERSION = "1"

# Received probability vectors are renormalized when their sum strays from
# 1 by at most this much; larger deviations are protocol errors.
RENORMALIZE_TOL = 1e-3

DEFAULT_MAX_INFLIGHT = 32
DEFAULT_TIMEOUT = 30.0


def encode_frame(obj: dict) -> bytes:
    return json.dumps(obj, separators=(",", ":")).encode("utf-8") + b"\n"


def pixels_to_base64(pixels: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(pixels).tobytes()).decode("ascii")


def pixels_from_base64(data: str, width: int, height: int,
                       channels: int = 3) -> np.ndarray:
    raw = base64.b64decode(data)
    expected = width * height * channels
    if len(raw) != expected:
        raise ValueError(
            f"pixel payload has {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)


def _resolve_labels(names: Sequence[str], taxonomy: Taxonomy | None) -> Taxonomy:
    """Build the client-side taxonomy for an advertised class list.

    With an explicit taxonomy every advertised name must resolve in it.
    Without one, ids are positional except False Detection, which keeps
    its reserved id 0.
    """
    if taxonomy is not None:
        try:
            return Taxonomy(taxonomy.by_name(name) for name in names)
        except ValueError as exc:
            raise HandshakeError(f"advertised class not in taxonomy: {exc}") from exc
    labels = [ClassLabel(0 if name == FALSE_DETECTION_NAME else i + 1, name)
              for i, name in enumerate(names)]
    return Taxonomy(labels)


class RemoteBackend(ClassifierBackend):
    """Client side of the wire protocol.

    ``endpoint`` may be a "host:port" string, a (host, port) tuple, or an
    already-connected socket (useful for tests). The handshake runs at
    construction time.
    """

    def __init__(self, endpoint, taxonomy: Taxonomy | None = None,
                 max_inflight: int = DEFAULT_MAX_INFLIGHT,
                 timeout: float = DEFAULT_TIMEOUT):
        self._sock = self._connect(endpoint, timeout)
        self._reader = self._sock.makefile("rb")
        self._next_id = 1
        self._last_acknowledged: int | None = None
        self.max_inflight = int(max_inflight)
        self._handshake(taxonomy)

    @staticmethod
    def _connect(endpoint, timeout: float) -> socket.socket:
        if isinstance(endpoint, socket.socket):
            endpoint.settimeout(timeout)
            return endpoint
        if isinstance(endpoint, str):
            host, _, port = endpoint.rpartition(":")
            if not host:
                raise ValueError(f"endpoint must look like host:port, got {endpoint!r}")
            endpoint = (host, int(port))
        try:
            sock = socket.create_connection(endpoint, timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {endpoint}: {exc}") from exc
        sock.settimeout(timeout)
        return sock

    def _handshake(self, taxonomy: Taxonomy | None):
        self._send({"op": "hello", "version": PROTOCOL_VERSION})
        reply = self._recv()
        if reply.get("op") != "hello":
            raise HandshakeError(f"expected hello reply, got {reply.get('op')!r}")
        if reply.get("version") != PROTOCOL_VERSION:
            raise HandshakeError(
                f"protocol version mismatch: client {PROTOCOL_VERSION!r}, "
                f"server {reply.get('version')!r}")
        names = reply.get("classes")
        if not isinstance(names, list) or not names:
            raise HandshakeError("hello reply must advertise a class list")
        self._taxonomy = _resolve_labels([str(n) for n in names], taxonomy)
        self.chip_size = int(reply.get("chip_size", 64))
        self.single_consumer = bool(reply.get("single_consumer", False))

    def taxonomy(self) -> Taxonomy:
        return self._taxonomy

    def _send(self, obj: dict):
        try:
            self._sock.sendall(encode_frame(obj))
        except OSError as exc:
            raise TransportError(f"connection lost while sending: {exc}",
                                 last_acknowledged_id=self._last_acknowledged) from exc

    def _recv(self) -> dict:
        try:
            line = self._reader.readline()
        except OSError as exc:
            raise TransportError(f"connection lost while receiving: {exc}",
                                 last_acknowledged_id=self._last_acknowledged) from exc
        if not line:
            raise TransportError("connection closed by backend",
                                 last_acknowledged_id=self._last_acknowledged)
        try:
            frame = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"backend sent invalid JSON: {exc}") from exc
        if not isinstance(frame, dict):
            raise ProtocolError("backend frame is not a JSON object")
        return frame

    def _check_probs(self, raw) -> np.ndarray:
        k = len(self._taxonomy)
        vec = np.asarray(raw, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != k:
            raise ProtocolError(
                f"probability vector has length {vec.size}, taxonomy has {k} classes")
        if np.any(vec < 0.0):
            raise ProtocolError("probability vector has negative entries")
        total = float(vec.sum())
        if abs(total - 1.0) > RENORMALIZE_TOL:
            raise ProtocolError(
                f"probability vector sums to {total}, outside tolerance "
                f"{RENORMALIZE_TOL}")
        if total != 1.0:
            vec = vec / total
        return check_probabilities(vec, k)

    def classify_batch(self, chips: Sequence[Chip]) -> list[np.ndarray]:
        results: list[np.ndarray | None] = [None] * len(chips)
        pending = deque(enumerate(chips))
        inflight: dict[int, int] = {}

        while pending or inflight:
            while pending and len(inflight) < self.max_inflight:
                position, chip = pending.popleft()
                request_id = self._next_id
                self._next_id += 1
                height, width = chip.pixels.shape[:2]
                try:
                    self._send({
                        "op": "classify",
                        "id": request_id,
                        "width": width,
                        "height": height,
                        "channels": 3,
                        "pixels": pixels_to_base64(chip.pixels),
                    })
                except TransportError as exc:
                    # Responses already buffered locally still count as
                    # acknowledged; drain them before reporting.
                    self._drain_acknowledgements(inflight)
                    raise TransportError(
                        str(exc),
                        last_acknowledged_id=self._last_acknowledged) from exc
                inflight[request_id] = position

            frame = self._recv()
            op = frame.get("op")
            if op == "result":
                request_id = frame.get("id")
                if request_id not in inflight:
                    raise ProtocolError(f"result for unknown request id {request_id}")
                results[inflight.pop(request_id)] = self._check_probs(
                    frame.get("probs"))
                self._last_acknowledged = request_id
            elif op == "error":
                raise ProtocolError(
                    f"backend error for request {frame.get('id')}: "
                    f"{frame.get('message')}")
            else:
                raise ProtocolError(f"unexpected frame op {op!r}")
        return results  # type: ignore[return-value]

    def _drain_acknowledgements(self, inflight: dict[int, int]):
        try:
            self._sock.settimeout(2.0)
        except OSError:
            return
        try:
            while inflight:
                frame = self._recv()
                request_id = frame.get("id")
                if frame.get("op") == "result" and request_id in inflight:
                    inflight.pop(request_id)
                    self._last_acknowledged = request_id
        except (TransportError, ProtocolError):
            return

    def close(self):
        try:
            self._reader.close()
        finally:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False
