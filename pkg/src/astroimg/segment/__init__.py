"""Segmentation: Chan-Vese level sets, random walker, and watershed splitting."""

from astroimg.segment.chanvese import ChanVeseParams, ChanVeseResult, chan_vese, chan_vese_energy
from astroimg.segment.markers import MarkerSet, markers_from_histogram
from astroimg.segment.randomwalk import random_walker
from astroimg.segment.watershed import distance_transform, split_overlapping, watershed

__all__ = [
    "ChanVeseParams",
    "ChanVeseResult",
    "chan_vese",
    "chan_vese_energy",
    "MarkerSet",
    "markers_from_histogram",
    "random_walker",
    "distance_transform",
    "watershed",
    "split_overlapping",
]
