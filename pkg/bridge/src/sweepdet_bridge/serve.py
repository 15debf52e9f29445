"""Wire-protocol server: newline-delimited JSON over TCP, version "1".

Handles one connection at a time and says so at handshake
(single_consumer = true); the detection engine serializes its calls
accordingly. Responses are sent in arrival order, which the protocol
permits (clients must match by id anyway). A malformed request line
produces an error frame with the offending id (0 when unparseable) and
the connection stays open.
"""

from __future__ import annotations

import base64
import json
import logging
import socket
import threading

import numpy as np
import torch
from PIL import Image

from .model import build_model, preprocess

log = logging.getLogger("sweepdet_bridge.serve")

PROTOCOL_VERSION = "1"


def load_model(artifact_path):
    artifact = torch.load(artifact_path, map_location="cpu",
                          weights_only=False)
    if artifact.get("format") != "sweepdet-bridge-model":
        raise ValueError(f"{artifact_path} is not a bridge model artifact")
    recipe = artifact["recipe"]
    model = build_model(recipe["architecture"],
                        num_classes=len(artifact["classes"]),
                        dropout=recipe["dropout"])
    model.load_state_dict(artifact["state_dict"])
    model.eval()
    return model, artifact


class ProtocolServer:
    def __init__(self, artifact_path, host: str = "127.0.0.1", port: int = 0):
        self.model, self.artifact = load_model(artifact_path)
        self.classes = [entry["name"] for entry in self.artifact["classes"]]
        self.chip_size = int(self.artifact["chip_size"])
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(1)
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    @property
    def endpoint(self) -> str:
        host, port = self._listener.getsockname()
        return f"{host}:{port}"

    def serve_forever(self):
        """Accept and handle one connection at a time until stopped."""
        log.info("serving %d classes on %s", len(self.classes), self.endpoint)
        while not self._stop.is_set():
            try:
                conn, peer = self._listener.accept()
            except OSError:
                return
            log.info("connection from %s", peer)
            try:
                self._handle_connection(conn)
            finally:
                conn.close()

    def start_background(self):
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        self._listener.close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.stop()
        return False

    # -- connection handling -------------------------------------------------

    def _handle_connection(self, conn: socket.socket):
        reader = conn.makefile("rb")
        try:
            while True:
                line = reader.readline()
                if not line:
                    return
                reply = self._handle_line(line)
                conn.sendall(json.dumps(reply).encode("utf-8") + b"\n")
        except OSError:
            return
        finally:
            reader.close()

    def _handle_line(self, line: bytes) -> dict:
        try:
            frame = json.loads(line)
            if not isinstance(frame, dict):
                raise ValueError("frame is not an object")
        except (json.JSONDecodeError, ValueError) as exc:
            return {"op": "error", "id": 0, "message": f"bad frame: {exc}"}

        op = frame.get("op")
        request_id = frame.get("id", 0)
        try:
            if op == "hello":
                if frame.get("version") != PROTOCOL_VERSION:
                    return {"op": "error", "id": request_id,
                            "message": "unsupported protocol version "
                                       f"{frame.get('version')!r}"}
                return {"op": "hello", "version": PROTOCOL_VERSION,
                        "classes": self.classes, "chip_size": self.chip_size,
                        "single_consumer": True}
            if op == "classify":
                probs = self._classify(frame)
                return {"op": "result", "id": request_id, "probs": probs}
            raise ValueError(f"unknown op {op!r}")
        except (KeyError, TypeError, ValueError) as exc:
            return {"op": "error", "id": request_id, "message": str(exc)}

    def _classify(self, frame: dict) -> list[float]:
        width = int(frame["width"])
        height = int(frame["height"])
        channels = int(frame.get("channels", 3))
        if channels != 3:
            raise ValueError(f"expected 3 channels, got {channels}")
        raw = base64.b64decode(frame["pixels"])
        if len(raw) != width * height * channels:
            raise ValueError(
                f"pixel payload has {len(raw)} bytes, expected "
                f"{width * height * channels}")
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(
            height, width, channels)
        if (height, width) != (self.chip_size, self.chip_size):
            img = Image.fromarray(pixels, mode="RGB").resize(
                (self.chip_size, self.chip_size), Image.BILINEAR)
            pixels = np.asarray(img, dtype=np.uint8)
        with torch.no_grad():
            logits = self.model(preprocess(pixels).unsqueeze(0))
            probs = torch.softmax(logits, dim=1)[0]
        return [float(p) for p in probs]
