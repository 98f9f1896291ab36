"""
Segmentation service

    uvicorn segmentation_service.app:app --port 8000

GET  /health   -> {"status": "ok"}
POST /segment  -> {"mask_png": <base64 PNG>, "pixels": <masked count>}
"""

from typing import List

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from kinematics_module import MaskPrompt
from pipeline_errors import PipelineError
from segmentation_service.cache import cached_response
from segmentation_service.segmentation_client import (
    StubSegmentationClient,
    decode_raster,
    encode_raster,
)

app = FastAPI(title="Embodiment Segmentation Service")
segmenter = StubSegmentationClient()


class PromptBody(BaseModel):
    keypoints_px: List[List[float]]
    line_segment_px: List[List[float]]
    embodiment: str
    partially_out_of_view: bool = False


class SegmentRequest(BaseModel):
    image_png: str
    prompt: PromptBody


@cached_response(ttl=3600)
def _segment(image_png: str, prompt: dict) -> dict:
    image = decode_raster(image_png)
    mask = segmenter.segment(image, MaskPrompt.from_dict(prompt))
    return {"mask_png": encode_raster(mask), "pixels": int(mask.sum())}


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/segment")
def segment(body: SegmentRequest):
    try:
        return _segment(body.image_png, body.prompt.model_dump())
    except (PipelineError, ValueError, OSError) as e:
        raise HTTPException(status_code=422, detail=str(e))
