"""Multi-signal smishing detection.

Four feature streams (semantic entity tags, structural tags, character-level
CNN, contextual phrase embeddings) reduced with truncated SVD and fused by an
attention-gated MLP, plus per-stream standalone classifiers and an ablation
harness.
"""

__version__ = "0.1.0"
