from segmentation_service.segmentation_client import (
    HttpSegmentationClient,
    SegmentationClient,
    StubSegmentationClient,
    decode_raster,
    encode_raster,
)

__all__ = [
    "SegmentationClient",
    "StubSegmentationClient",
    "HttpSegmentationClient",
    "encode_raster",
    "decode_raster",
]
