"""Client-side conformance suite for the wire protocol, run against a
scripted fake server: handshake, pipelining, out-of-order matching,
renormalization tolerance, error frames and mid-batch disconnects."""

import numpy as np
import pytest

from sweepdet import (HandshakeError, ProtocolError, RemoteBackend, Taxonomy,
                      TransportError)
from sweepdet.chips import Chip
from sweepdet.remote import pixels_from_base64, pixels_to_base64

from protocol_testkit import (ScriptedServer, buffered_reverse_handler,
                              close_after_handler, error_frame_handler,
                              result_frame)


def make_chips(n, side=8):
    rng = np.random.default_rng(0)
    return [Chip(pixels=rng.integers(0, 256, size=(side, side, 3),
                                     dtype=np.uint8)) for _ in range(n)]


def id_tagged_probs(frame):
    """Probability vector that encodes the request id, so positional
    matching mistakes are visible."""
    tag = (frame["id"] % 7) / 100.0
    return [0.5 + tag, 0.5 - tag]


class TestHandshake:
    def test_matching_version_reaches_ready_state(self):
        with ScriptedServer(classes=["False Detection", "Excavator"],
                            chip_size=16, single_consumer=True) as server:
            backend = RemoteBackend(server.endpoint)
            assert backend.taxonomy().names == ["False Detection", "Excavator"]
            assert backend.chip_size == 16
            assert backend.single_consumer is True
            assert backend.taxonomy().false_detection.id == 0
            backend.close()

    def test_version_mismatch_is_handshake_error(self):
        with ScriptedServer(version="2") as server:
            with pytest.raises(HandshakeError):
                RemoteBackend(server.endpoint)

    def test_missing_class_list_is_handshake_error(self):
        with ScriptedServer(hello_extra={"classes": []}) as server:
            with pytest.raises(HandshakeError):
                RemoteBackend(server.endpoint)

    def test_explicit_taxonomy_must_resolve_names(self):
        taxonomy = Taxonomy.default()
        with ScriptedServer(classes=["False Detection", "Excavator"]) as server:
            backend = RemoteBackend(server.endpoint, taxonomy=taxonomy)
            assert backend.taxonomy().by_name("Excavator").id == 64
            backend.close()
        with ScriptedServer(classes=["False Detection", "Martian"]) as server:
            with pytest.raises(HandshakeError):
                RemoteBackend(server.endpoint, taxonomy=taxonomy)


class TestClassify:
    def test_round_trip_preserves_order_and_length(self):
        with ScriptedServer() as server:
            backend = RemoteBackend(server.endpoint)
            chips = make_chips(5)
            results = backend.classify_batch(chips)
            assert len(results) == 5
            for vec in results:
                assert vec.shape == (2,)
                assert vec.sum() == pytest.approx(1.0, abs=1e-9)
            backend.close()

    def test_requests_are_pipelined(self):
        # The server stays silent until three requests have arrived; a
        # client that waits for each response before sending the next
        # would deadlock here.
        handler = buffered_reverse_handler(3, id_tagged_probs)
        with ScriptedServer(classify_handler=handler) as server:
            backend = RemoteBackend(server.endpoint)
            results = backend.classify_batch(make_chips(3))
            assert len(results) == 3
            backend.close()

    def test_out_of_order_responses_match_by_id(self):
        handler = buffered_reverse_handler(4, id_tagged_probs)
        with ScriptedServer(classify_handler=handler) as server:
            backend = RemoteBackend(server.endpoint)
            chips = make_chips(4)
            results = backend.classify_batch(chips)
            # ids are assigned 1..4 in submission order; verify each
            # position carries its own id's tag despite reversed delivery
            for position, vec in enumerate(results):
                expected = id_tagged_probs({"id": position + 1})
                assert vec[0] == pytest.approx(expected[0], abs=1e-9)
            backend.close()

    def test_pixels_payload_is_row_major_rgb(self):
        captured = {}

        def handler(frame):
            captured.update(frame)
            return [result_frame(frame["id"], [0.5, 0.5])], False

        with ScriptedServer(classify_handler=handler) as server:
            backend = RemoteBackend(server.endpoint)
            chip = make_chips(1, side=4)[0]
            backend.classify_batch([chip])
            assert captured["width"] == 4
            assert captured["height"] == 4
            assert captured["channels"] == 3
            decoded = pixels_from_base64(captured["pixels"], 4, 4)
            np.testing.assert_array_equal(decoded, chip.pixels)
            backend.close()

    def test_base64_round_trip(self):
        pixels = np.arange(48, dtype=np.uint8).reshape(4, 4, 3)
        again = pixels_from_base64(pixels_to_base64(pixels), 4, 4)
        np.testing.assert_array_equal(again, pixels)


class TestTolerances:
    def test_slightly_off_sum_is_renormalized(self):
        def handler(frame):
            return [result_frame(frame["id"], [0.5005, 0.5])], False

        with ScriptedServer(classify_handler=handler) as server:
            backend = RemoteBackend(server.endpoint)
            [vec] = backend.classify_batch(make_chips(1))
            assert vec.sum() == pytest.approx(1.0, abs=1e-12)
            assert vec[0] == pytest.approx(0.5005 / 1.0005)
            backend.close()

    def test_badly_off_sum_is_protocol_error(self):
        def handler(frame):
            return [result_frame(frame["id"], [0.8, 0.4])], False

        with ScriptedServer(classify_handler=handler) as server:
            backend = RemoteBackend(server.endpoint)
            with pytest.raises(ProtocolError):
                backend.classify_batch(make_chips(1))
            backend.close()

    def test_wrong_vector_length_is_protocol_error(self):
        def handler(frame):
            return [result_frame(frame["id"], [1.0])], False

        with ScriptedServer(classes=["False Detection", "A", "B"],
                            classify_handler=handler) as server:
            backend = RemoteBackend(server.endpoint)
            with pytest.raises(ProtocolError):
                backend.classify_batch(make_chips(1))
            backend.close()

    def test_unknown_result_id_is_protocol_error(self):
        def handler(frame):
            return [result_frame(frame["id"] + 1000, [0.5, 0.5])], False

        with ScriptedServer(classify_handler=handler) as server:
            backend = RemoteBackend(server.endpoint)
            with pytest.raises(ProtocolError):
                backend.classify_batch(make_chips(1))
            backend.close()


class TestFailures:
    def test_error_frame_surfaces_message(self):
        with ScriptedServer(
                classify_handler=error_frame_handler("gpu on fire")) as server:
            backend = RemoteBackend(server.endpoint)
            with pytest.raises(ProtocolError, match="gpu on fire"):
                backend.classify_batch(make_chips(2))
            backend.close()

    def test_disconnect_mid_batch_carries_last_acknowledged_id(self):
        handler = close_after_handler(2, lambda f: [0.5, 0.5])
        with ScriptedServer(classify_handler=handler) as server:
            backend = RemoteBackend(server.endpoint)
            with pytest.raises(TransportError) as excinfo:
                backend.classify_batch(make_chips(5))
            assert excinfo.value.last_acknowledged_id == 2
            backend.close()

    def test_disconnect_before_any_response(self):
        handler = close_after_handler(0, lambda f: [0.5, 0.5])
        with ScriptedServer(classify_handler=handler) as server:
            backend = RemoteBackend(server.endpoint)
            with pytest.raises(TransportError) as excinfo:
                backend.classify_batch(make_chips(3))
            assert excinfo.value.last_acknowledged_id is None
            backend.close()
