# reconet/flow/__init__.py
from .flo import read_flo, write_flo, load_flo, save_flo, FLO_MAGIC
from .occlusion import occlusion_mask
from .transforms import (
    downscale_flow,
    warp,
    warp_array,
    flip_horizontal,
    sampling_flow,
    resize_flow,
    resize_mask,
)
