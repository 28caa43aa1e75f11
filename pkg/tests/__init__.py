"""
Test suite for dvcselect.
"""
