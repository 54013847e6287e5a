# reconet/models/__init__.py
from .flow import FlowField, OcclusionMask
from .sample import FramePairSample, SceneSequence
