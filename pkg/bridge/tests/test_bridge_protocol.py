import json

import numpy as np
import pytest

from dfabeam_bridge.export import export_concept_table
from dfabeam_bridge.models import StubUniformModel
from dfabeam_bridge.server import Bridge, serve_http

from bridge_env import GOLDEN


@pytest.fixture
def golden_bridge():
    model = StubUniformModel(["cat", "politician"])
    table = export_concept_table(model,
                                 {"cat": "cat", "politician": "politician"})
    return Bridge(model, table)


class TestStreamProtocol:
    def test_golden_round_trip_is_byte_compatible(self, golden_bridge):
        req_vocab, resp_vocab, req_score, resp_score = \
            GOLDEN.read_bytes().splitlines(keepends=True)
        assert golden_bridge.handle_line(req_vocab) == resp_vocab
        assert golden_bridge.handle_line(req_score) == resp_score

    def test_rows_normalize(self, golden_bridge):
        response = json.loads(golden_bridge.handle_line(
            b'{"id": 5, "prefixes": [[], [2]]}'))
        rows = np.asarray(response["logprobs"])
        mass = np.logaddexp.reduce(rows, axis=1)
        assert np.all(np.abs(mass) < 1e-4)

    def test_malformed_line_answers_an_error(self, golden_bridge):
        response = json.loads(golden_bridge.handle_line(b"{nope\n"))
        assert "error" in response
        assert response["id"] is None

    def test_bad_prefixes_answer_an_error(self, golden_bridge):
        response = json.loads(golden_bridge.handle_line(
            b'{"id": 3, "prefixes": "what"}'))
        assert response["id"] == 3
        assert "error" in response

    def test_batch_limit_enforced(self):
        model = StubUniformModel(["cat"])
        bridge = Bridge(model, {}, max_batch=2)
        request = json.dumps({"id": 1, "prefixes": [[], [], []]}).encode()
        response = json.loads(bridge.handle_line(request))
        assert "error" in response

    def test_out_of_range_output_answers_an_error(self, golden_bridge):
        response = json.loads(golden_bridge.handle_line(
            b'{"id": 9, "prefixes": [[9999]]}'))
        assert "error" in response

    def test_large_batch_equals_single_calls(self, golden_bridge):
        prefixes = [[i % 3] for i in range(64)]
        batch = json.loads(golden_bridge.handle_line(json.dumps(
            {"id": 1, "prefixes": prefixes}).encode()))["logprobs"]
        singles = [json.loads(golden_bridge.handle_line(json.dumps(
            {"id": 2 + i, "prefixes": [p]}).encode()))["logprobs"][0]
            for i, p in enumerate(prefixes)]
        assert np.allclose(np.asarray(batch), np.asarray(singles), atol=1e-5)


class TestHttpProtocol:
    def test_vocab_and_score_round_trip(self, golden_bridge):
        import threading

        from dfabeam.scorers import RemoteScorer
        server = serve_http(golden_bridge, 0)
        port = server.server_address[1]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            scorer = RemoteScorer.http(f"http://127.0.0.1:{port}")
            assert scorer.vocab_size == golden_bridge.model.vocab_size
            rows = scorer.score([[2], []])
            assert rows.shape == (2, scorer.vocab_size)
        finally:
            server.shutdown()
