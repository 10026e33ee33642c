"""Tensor algebra for SliceLRTD - tensors, mode-3 transforms, t-SVD"""
