"""
Tools Layer for SliceLRTD

Provides metrics, validation, run reports and the decomposition tool wrapper.
Import from the submodules (``tools.metrics``, ``tools.decomposition_tool``, ...).
"""
