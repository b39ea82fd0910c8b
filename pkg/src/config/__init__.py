"""
Configuration management and settings
"""
