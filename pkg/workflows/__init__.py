"""Benchmark workflows for SliceLRTD - transform comparison and segment-length sweep"""
