"""Scripted fake server for exercising the wire-protocol client.

The server runs on an ephemeral localhost port in a daemon thread and
handles a single connection. Classify behavior is pluggable: handlers
receive the decoded request frame and decide what to emit, which makes
out-of-order replies, malformed vectors, error frames and mid-batch
disconnects easy to script.
"""

from __future__ import annotations

import json
import socket
import threading

PROTOCOL_VERSION = "1"


def uniform_probs(frame, n_classes):
    return [1.0 / n_classes] * n_classes


class ScriptedServer:
    def __init__(self, classes=("False Detection", "Excavator"), chip_size=8,
                 single_consumer=False, version=PROTOCOL_VERSION,
                 hello_extra=None, classify_handler=None):
        self.classes = list(classes)
        self.chip_size = chip_size
        self.single_consumer = single_consumer
        self.version = version
        self.hello_extra = hello_extra or {}
        self.classify_handler = classify_handler or self._default_handler
        self.requests: list[dict] = []

        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.bind(("127.0.0.1", 0))
        self._listener.listen(1)
        self.port = self._listener.getsockname()[1]
        self._thread = threading.Thread(target=self._serve, daemon=True)

    @property
    def endpoint(self) -> str:
        return f"127.0.0.1:{self.port}"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc_info):
        self._listener.close()
        return False

    def _default_handler(self, frame):
        return [{"op": "result", "id": frame["id"],
                 "probs": uniform_probs(frame, len(self.classes))}], False

    def _serve(self):
        try:
            conn, _ = self._listener.accept()
        except OSError:
            return
        reader = conn.makefile("rb")
        try:
            while True:
                line = reader.readline()
                if not line:
                    return
                frame = json.loads(line)
                if frame.get("op") == "hello":
                    reply = {"op": "hello", "version": self.version,
                             "classes": self.classes,
                             "chip_size": self.chip_size,
                             "single_consumer": self.single_consumer}
                    reply.update(self.hello_extra)
                    conn.sendall(json.dumps(reply).encode() + b"\n")
                    continue
                self.requests.append(frame)
                replies, close = self.classify_handler(frame)
                for reply in replies:
                    conn.sendall(json.dumps(reply).encode() + b"\n")
                if close:
                    conn.shutdown(socket.SHUT_RDWR)
                    return
        except OSError:
            return
        finally:
            reader.close()
            conn.close()


def result_frame(request_id, probs):
    return {"op": "result", "id": request_id, "probs": probs}


def buffered_reverse_handler(batch, probs_for):
    """Hold ``batch`` requests, then answer them in reverse order."""
    pending = []

    def handler(frame):
        pending.append(frame)
        if len(pending) < batch:
            return [], False
        replies = [result_frame(f["id"], probs_for(f))
                   for f in reversed(pending)]
        pending.clear()
        return replies, False

    return handler


def close_after_handler(answer_first, probs_for):
    """Answer the first ``answer_first`` requests, then drop the link."""
    state = {"answered": 0}

    def handler(frame):
        if state["answered"] < answer_first:
            state["answered"] += 1
            return [result_frame(frame["id"], probs_for(frame))], False
        return [], True

    return handler


def error_frame_handler(message="no model loaded"):
    def handler(frame):
        return [{"op": "error", "id": frame["id"], "message": message}], False

    return handler
