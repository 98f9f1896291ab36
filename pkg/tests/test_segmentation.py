import numpy as np
import pytest
import requests

from kinematics_module import MaskPrompt, hand_prompt
from pipeline_errors import DimensionMismatch, ServiceUnavailable
from segmentation_service import (
    HttpSegmentationClient,
    StubSegmentationClient,
    decode_raster,
    encode_raster,
)
from segmentation_service.cache import cached_response, clear_cache


def triangle_prompt():
    return MaskPrompt([[10, 10], [30, 10], [20, 25]], [[20, 25], [10, 10]], 'robot')


def test_stub_covers_hull_and_radius():
    image = np.zeros((40, 50, 3), dtype=np.uint8)
    mask = StubSegmentationClient(radius_px=3).segment(image, triangle_prompt())
    assert mask.shape == (40, 50)
    assert mask[14, 20]
    assert mask[10, 8]
    assert not mask[10, 5]
    assert not mask[35, 45]


def test_stub_handles_collinear_and_single_points():
    image = np.zeros((20, 20, 3), dtype=np.uint8)
    stub = StubSegmentationClient(radius_px=1)
    line = stub.segment(image, hand_prompt((5, 5, 15, 15), hand_px=(10, 10)))
    assert line[10, 10] and line[5, 5] and line[15, 15]
    assert not line[5, 15]
    dot = stub.segment(image, MaskPrompt([[4, 4]], [[4, 4], [4, 4]], 'human'))
    assert dot.sum() == 5


def test_stub_rejects_non_rgb_image():
    with pytest.raises(DimensionMismatch):
        StubSegmentationClient().segment(np.zeros((5, 5)), triangle_prompt())


def test_raster_encoding_is_lossless():
    rng = np.random.default_rng(0)
    image = rng.integers(0, 256, size=(7, 11, 3), dtype=np.uint8)
    assert np.array_equal(decode_raster(encode_raster(image)), image)
    mask = rng.random((7, 11)) > 0.5
    assert np.array_equal(decode_raster(encode_raster(mask), as_mask=True), mask)


def test_cache_returns_stored_value():
    clear_cache()
    calls = []

    @cached_response(ttl=60)
    def expensive(payload):
        calls.append(payload)
        return {'n': len(calls)}

    assert expensive({'a': 1}) == {'n': 1}
    assert expensive({'a': 1}) == {'n': 1}
    assert expensive({'a': 2}) == {'n': 2}
    assert len(calls) == 2
    clear_cache()


def test_http_client_gives_up_after_retries(monkeypatch):
    attempts = []

    def refuse(*args, **kwargs):
        attempts.append(kwargs.get('timeout'))
        raise requests.ConnectionError("connection refused")

    monkeypatch.setattr(requests, 'post', refuse)
    client = HttpSegmentationClient('http://127.0.0.1:1', timeout_s=0.1, backoff_s=0.0)
    with pytest.raises(ServiceUnavailable) as info:
        client.segment(np.zeros((8, 8, 3), dtype=np.uint8), triangle_prompt())
    assert len(attempts) == HttpSegmentationClient.ATTEMPTS
    assert info.value.code == 'ServiceUnavailable'


def test_http_client_health_is_false_when_down(monkeypatch):
    def refuse(*args, **kwargs):
        raise requests.ConnectionError("down")

    monkeypatch.setattr(requests, 'get', refuse)
    assert not HttpSegmentationClient('http://127.0.0.1:1').health()


def test_service_matches_stub():
    pytest.importorskip('httpx')
    from fastapi.testclient import TestClient

    from segmentation_service.app import app

    clear_cache()
    client = TestClient(app)
    assert client.get('/health').json() == {'status': 'ok'}

    image = np.full((40, 50, 3), 128, dtype=np.uint8)
    prompt = triangle_prompt()
    resp = client.post('/segment', json={'image_png': encode_raster(image), 'prompt': prompt.to_dict()})
    assert resp.status_code == 200
    served = decode_raster(resp.json()['mask_png'], as_mask=True)
    assert np.array_equal(served, StubSegmentationClient().segment(image, prompt))
    assert resp.json()['pixels'] == int(served.sum())


def test_service_rejects_garbage_image():
    pytest.importorskip('httpx')
    from fastapi.testclient import TestClient

    from segmentation_service.app import app

    clear_cache()
    resp = TestClient(app).post('/segment', json={'image_png': 'bm90IGEgcG5n',
                                                  'prompt': triangle_prompt().to_dict()})
    assert resp.status_code == 422
