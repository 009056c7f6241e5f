"""Stereo geometry, a ray-traced stereo oracle, the depth-warp-inpaint
baseline, stereo quality metrics, format analysis, video curation and
rectified-flow numerics."""

__version__ = "0.1.0"
