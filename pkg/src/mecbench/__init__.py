"""Edge-vs-cloud computation offloading benchmark."""

__version__ = "0.1.0"

# Working resolution of every frame the offload server analyses.
FRAME_WIDTH = 200
FRAME_HEIGHT = 152
