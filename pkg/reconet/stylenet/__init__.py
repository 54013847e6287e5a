# reconet/stylenet/__init__.py
from .network import (
    ReCoNet,
    EncoderParams,
    DecoderParams,
    encode,
    decode,
    layer_manifest,
    parameter_count,
    FEATURE_CHANNELS,
)
from .backbone import PerceptualBackbone, backbone_features, build_backbone, STYLE_TAPS, CONTENT_TAP
from .checkpoint import save_checkpoint, load_checkpoint, load_checkpoint_file, read_container, write_container
