# reconet/training/__init__.py
from .dataset import DatasetLayout, FramePairDataset, augment, load_dataset, load_scene
from .optim import AdamState, adam_step, load_adam_state, save_adam_state
from .trainer import TrainResult, forward_pair, load_style_image, prepare_style, train, train_step
