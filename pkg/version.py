"""
Version management for nevo_gspt
"""

VERSION = "0.1.0"
MODEL_FORMAT_VERSION = 1


def get_version():
    """Get the current version of the package"""
    return VERSION
