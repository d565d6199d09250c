"""
Run bookkeeping helpers: worker counts, content hashes and host details
"""

import hashlib
import logging
import platform
from pathlib import Path
from typing import Any, Dict, Optional

import psutil

logger = logging.getLogger(__name__)


def resolve_workers(requested: Optional[int], default: int) -> int:
    """Worker count for the replica pool, never above the logical CPU count"""
    workers = requested or default
    available = psutil.cpu_count(logical=True) or 1
    if workers > available:
        logger.warning(f"Requested {workers} workers but only {available} CPUs are available")
        workers = available
    return max(int(workers), 1)


def content_hash(data: bytes) -> str:
    """Git-style blob hash: sha1 of 'blob <size>\\0' + data"""
    header = f"blob {len(data)}\0".encode()
    return hashlib.sha1(header + data).hexdigest()


def file_hash(path: str) -> str:
    return content_hash(Path(path).read_bytes())


def host_info() -> Dict[str, Any]:
    """Machine description recorded in run manifests"""
    memory = psutil.virtual_memory()
    return {
        'platform': platform.platform(),
        'python': platform.python_version(),
        'cpu_physical': psutil.cpu_count(logical=False),
        'cpu_logical': psutil.cpu_count(logical=True),
        'memory_total_gb': round(memory.total / 1024 ** 3, 2),
    }
