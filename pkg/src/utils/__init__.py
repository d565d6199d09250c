"""
Utility modules for Heatwave
"""

from .run_utils import resolve_workers, content_hash, file_hash, host_info

__all__ = ['resolve_workers', 'content_hash', 'file_hash', 'host_info']
