"""Configuration module for SliceLRTD"""
