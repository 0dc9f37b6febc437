"""Assembly-training assistant workflow.

Subpackages cover the instruction-manual model, the tool-driven MR
simulator, the vision sub-agent boundary, the trainer agent loop, the
dialogue-dataset pipeline, the metric suite, and a live session service.
"""

__version__ = "0.1.0"
