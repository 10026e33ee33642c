"""Data layer for SliceLRTD - MetaImage volume I/O and synthetic phantoms"""
