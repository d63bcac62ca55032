from __future__ import annotations

import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, strategies as st

from eventlens.embedding import (
    DimensionMismatch,
    EmbeddingVector,
    ProviderUnavailable,
    RemoteEmbedder,
    StubEmbedder,
    ZeroVector,
    cosine_similarity,
    make_provider,
)


class TestCosine:
    def test_self_similarity_exact(self):
        v = EmbeddingVector((0.3, 0.4, 0.5))
        assert cosine_similarity(v, v) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity(EmbeddingVector((1.0, 0.0)), EmbeddingVector((0.0, 1.0))) == 0.0

    def test_antipodal(self):
        assert cosine_similarity(EmbeddingVector((1.0, 0.0)), EmbeddingVector((-1.0, 0.0))) == -1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine_similarity(EmbeddingVector((1.0,)), EmbeddingVector((1.0, 0.0)))

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine_similarity(EmbeddingVector((0.0, 0.0)), EmbeddingVector((1.0, 0.0)))

    @given(st.lists(st.floats(-5, 5, allow_subnormal=False), min_size=4, max_size=4))
    def test_symmetry(self, values):
        a = EmbeddingVector(tuple(values))
        b = EmbeddingVector((1.0, -2.0, 0.5, 3.0))
        if a.is_zero() or math.sqrt(sum(v * v for v in values)) == 0.0:
            return
        assert cosine_similarity(a, b) == cosine_similarity(b, a)

    @given(
        st.lists(st.floats(-5, 5, allow_subnormal=False), min_size=3, max_size=3),
        st.floats(min_value=0.001, max_value=100.0),
    )
    def test_positive_scale_invariance(self, values, scale):
        a = EmbeddingVector(tuple(values))
        if a.is_zero() or math.sqrt(sum(v * v for v in values)) == 0.0:
            return
        scaled = EmbeddingVector(tuple(v * scale for v in values))
        assert cosine_similarity(a, scaled) == pytest.approx(1.0, abs=1e-9)

    def test_underflowing_norm_is_zero_vector(self):
        tiny = EmbeddingVector((5e-324, 0.0))
        with pytest.raises(ZeroVector):
            cosine_similarity(tiny, EmbeddingVector((1.0, 0.0)))


class TestStubEmbedder:
    def test_deterministic(self):
        stub = StubEmbedder()
        assert stub.embed("x") == stub.embed("x")
        assert StubEmbedder().embed("same text here") == stub.embed("same text here")

    def test_empty_text_designated_vector(self):
        vec = StubEmbedder().embed("")
        assert vec.values[0] == 1.0
        assert all(v == 0.0 for v in vec.values[1:])

    def test_token_free_text_maps_to_empty_vector(self):
        stub = StubEmbedder()
        assert stub.embed("!!! ???") == stub.embed("")

    def test_token_order_insensitive(self):
        stub = StubEmbedder()
        assert stub.embed("red blue green") == stub.embed("green red blue")

    def test_case_folding(self):
        stub = StubEmbedder()
        assert stub.embed("Presidential INAUGURATION") == stub.embed("presidential inauguration")

    def test_overlap_orders_similarity(self):
        stub = StubEmbedder()
        base = stub.embed("presidential inauguration")
        near = stub.embed("presidential inauguration ceremony")
        far = stub.embed("stock market crash")
        assert cosine_similarity(base, near) > cosine_similarity(base, far)

    def test_unit_norm(self):
        vec = StubEmbedder().embed("some ordinary sentence with words")
        assert sum(v * v for v in vec.values) == pytest.approx(1.0, abs=1e-12)

    def test_embed_many_order_preserving(self):
        stub = StubEmbedder()
        many = stub.embed_many(["a", "b", "a"])
        assert many[0] == many[2] == stub.embed("a")
        assert many[1] == stub.embed("b")


class _EmbeddingHandler(BaseHTTPRequestHandler):
    behavior = "ok"  # ok | short | bad_json

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        texts = json.loads(self.rfile.read(length))["texts"]
        if self.behavior == "bad_json":
            body = b"not json"
        else:
            vectors = [[float(len(t)), 1.0, 0.0] for t in texts]
            if self.behavior == "short":
                vectors = vectors[:-1]
            body = json.dumps({"vectors": vectors}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def embedding_server():
    server = HTTPServer(("127.0.0.1", 0), _EmbeddingHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", _EmbeddingHandler
    server.shutdown()


class TestRemoteEmbedder:
    def test_round_trip(self, embedding_server):
        url, handler = embedding_server
        handler.behavior = "ok"
        remote = RemoteEmbedder(url=url, dim=3)
        vectors = remote.embed_many(["ab", "abcd"])
        assert vectors[0] == EmbeddingVector((2.0, 1.0, 0.0))
        assert vectors[1] == EmbeddingVector((4.0, 1.0, 0.0))
        assert remote.embed("ab") == vectors[0]

    def test_wrong_count_is_unavailable(self, embedding_server):
        url, handler = embedding_server
        handler.behavior = "short"
        with pytest.raises(ProviderUnavailable):
            RemoteEmbedder(url=url, dim=3).embed_many(["a", "b"])

    def test_bad_body_is_unavailable(self, embedding_server):
        url, handler = embedding_server
        handler.behavior = "bad_json"
        with pytest.raises(ProviderUnavailable):
            RemoteEmbedder(url=url, dim=3).embed("a")

    def test_wrong_dim_is_unavailable(self, embedding_server):
        url, handler = embedding_server
        handler.behavior = "ok"
        with pytest.raises(ProviderUnavailable):
            RemoteEmbedder(url=url, dim=7).embed("a")

    def test_unreachable_is_unavailable(self):
        remote = RemoteEmbedder(url="http://127.0.0.1:9", dim=3, timeout_s=0.2)
        with pytest.raises(ProviderUnavailable):
            remote.embed("a")


class TestFactory:
    def test_stub(self):
        provider = make_provider("stub")
        assert provider.name == "stub" and provider.dim == 256

    def test_remote_requires_url(self):
        with pytest.raises(ValueError):
            make_provider("remote")

    def test_unknown(self):
        with pytest.raises(ValueError):
            make_provider("quantum")
