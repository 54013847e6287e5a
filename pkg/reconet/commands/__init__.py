# reconet/commands/__init__.py
from . import bench, evaluate, fixture, flow, stylize, train

COMMANDS = [train, stylize, evaluate, flow, bench, fixture]
