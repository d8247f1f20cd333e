"""
condcap/common

Shared types, error codes and constants.
"""
