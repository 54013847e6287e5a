# reconet/evaluation/__init__.py
from .stability import e_stab, scene_stability, transition_errors
from .histogram import warp_error_histogram
from .maps import ErrorMapPair, temporal_error_maps, write_error_maps, DEFAULT_ERR_SCALE
from .benchmark import fps_benchmark, halving_sanity, hardware_descriptor
