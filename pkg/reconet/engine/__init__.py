# reconet/engine/__init__.py
from .tensor import Tensor, Tape, backward, current_tape, set_debug_finite, DEFAULT_DTYPE, GRADCHECK_DTYPE
from .gradcheck import finite_diff_check, sample_indices
from . import ops
