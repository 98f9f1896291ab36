"""
Segmentation clients

Contract: segment(image, prompt) -> boolean mask of the image's size.
Callers may issue requests from several threads at once.

- StubSegmentationClient: dilated convex hull of the prompt points (offline)
- HttpSegmentationClient: talks to the FastAPI service in app.py
"""

import base64
import io
import time
from typing import Optional

import numpy as np
import requests
from PIL import Image
from scipy.spatial import ConvexHull, QhullError

from kinematics_module import MaskPrompt
from pipeline_errors import DimensionMismatch, ServiceUnavailable

DEFAULT_URL = "http://127.0.0.1:8000"


def encode_raster(raster: np.ndarray) -> str:
    """PNG + base64 for JSON transport (RGB image or boolean mask)"""
    raster = np.asarray(raster)
    if raster.dtype == bool:
        raster = raster.astype(np.uint8) * 255
    buffer = io.BytesIO()
    Image.fromarray(raster.astype(np.uint8)).save(buffer, format='PNG')
    return base64.b64encode(buffer.getvalue()).decode('ascii')


def decode_raster(payload: str, as_mask: bool = False) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(payload))) as img:
        if as_mask:
            return np.asarray(img.convert('L')) > 127
        return np.asarray(img.convert('RGB'), dtype=np.uint8)


class SegmentationClient:
    """Base class: subclasses implement segment()"""

    def segment(self, image: np.ndarray, prompt: MaskPrompt) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def _check_image(image: np.ndarray) -> np.ndarray:
        image = np.asarray(image)
        if image.ndim != 3 or image.shape[2] != 3:
            raise DimensionMismatch(f"expected an (H, W, 3) image, got {image.shape}")
        return image


class StubSegmentationClient(SegmentationClient):
    """
    Offline stand-in for a promptable segmenter

    Marks every pixel within `radius_px` of the convex hull spanned by the
    prompt keypoints and line endpoints.
    """

    RADIUS_PX = 12.0

    def __init__(self, radius_px: Optional[float] = None):
        self.radius_px = self.RADIUS_PX if radius_px is None else float(radius_px)

    def segment(self, image: np.ndarray, prompt: MaskPrompt) -> np.ndarray:
        image = self._check_image(image)
        height, width = image.shape[:2]
        points = np.vstack([prompt.keypoints_px, prompt.line_segment_px])
        vv, uu = np.mgrid[0:height, 0:width]
        grid = np.column_stack([uu.ravel(), vv.ravel()]).astype(np.float64)
        distance = hull_distance(points, grid)
        return (distance <= self.radius_px).reshape(height, width)


def _segment_distance(grid: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(grid - a, axis=1)
    s = np.clip((grid - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(grid - (a + s[:, None] * ab), axis=1)


def hull_distance(points: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Distance from each grid point to the convex hull of `points` (0 inside)"""
    points = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    try:
        hull = ConvexHull(points)
    except (QhullError, ValueError):
        # fewer than 3 distinct or collinear points: hull is a segment (or a point)
        direction = points[-1] - points[0]
        if not np.any(direction):
            return np.linalg.norm(grid - points[0], axis=1)
        along = points @ direction
        return _segment_distance(grid, points[np.argmin(along)], points[np.argmax(along)])

    inside = np.all(grid @ hull.equations[:, :2].T + hull.equations[:, 2] <= 1e-12, axis=1)
    vertices = points[hull.vertices]
    edges = [_segment_distance(grid, vertices[i], vertices[(i + 1) % len(vertices)])
             for i in range(len(vertices))]
    distance = np.min(np.stack(edges), axis=0)
    distance[inside] = 0.0
    return distance


class HttpSegmentationClient(SegmentationClient):
    """
    Client for the segmentation service

    Retries ATTEMPTS times with a growing sleep, then raises ServiceUnavailable.
    """

    ATTEMPTS = 3
    TIMEOUT_S = 30.0
    BACKOFF_S = 1.0

    def __init__(self, base_url: str = DEFAULT_URL, timeout_s: Optional[float] = None,
                 backoff_s: Optional[float] = None, verbose: bool = False):
        self.base_url = base_url.rstrip('/')
        self.timeout_s = self.TIMEOUT_S if timeout_s is None else timeout_s
        self.backoff_s = self.BACKOFF_S if backoff_s is None else backoff_s
        self.verbose = verbose

    def health(self) -> bool:
        try:
            resp = requests.get(f"{self.base_url}/health", timeout=self.timeout_s)
            return resp.ok and resp.json().get('status') == 'ok'
        except (requests.RequestException, ValueError):
            return False

    def segment(self, image: np.ndarray, prompt: MaskPrompt) -> np.ndarray:
        image = self._check_image(image)
        payload = {'image_png': encode_raster(image), 'prompt': prompt.to_dict()}
        last_error = None
        for attempt in range(self.ATTEMPTS):
            try:
                resp = requests.post(f"{self.base_url}/segment", json=payload, timeout=self.timeout_s)
                resp.raise_for_status()
                mask = decode_raster(resp.json()['mask_png'], as_mask=True)
                if mask.shape != image.shape[:2]:
                    raise DimensionMismatch(f"service returned a {mask.shape} mask for a "
                                            f"{image.shape[:2]} image")
                return mask
            except (requests.RequestException, KeyError, ValueError) as e:
                if isinstance(e, DimensionMismatch):
                    raise
                last_error = e
                if self.verbose:
                    print(f"  ⚠ segmentation request failed (attempt {attempt + 1}): {e}")
                if attempt + 1 < self.ATTEMPTS:
                    time.sleep(self.backoff_s * (attempt + 1))

        raise ServiceUnavailable(f"segmentation service at {self.base_url} failed "
                                 f"{self.ATTEMPTS} times: {last_error}", url=self.base_url)
