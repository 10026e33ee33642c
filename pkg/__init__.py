"""
SliceLRTD - Multi-Slice Low-Rank Tensor Decomposition

Splits aligned 3D volume stacks into a shared low-rank background and sparse
per-volume anomalies with tensor principal component pursuit solved by ADMM
on short slice segments.

Version: 1.0.0
"""

__version__ = "1.0.0"
