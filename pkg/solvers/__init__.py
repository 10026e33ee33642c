"""Solvers for SliceLRTD - TPCP via ADMM and the multi-slice driver"""
