"""
sisaug test suite
"""
