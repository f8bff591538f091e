"""
工具函数模块
"""
import hashlib
import os
from datetime import datetime
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
import pytz

from app.core.exceptions import ConfigError


def calculate_array_hash(arrays: Iterable[np.ndarray], algorithm: str = "sha256", prefix: str = "") -> str:
    """
    计算数组内容的哈希值

    Args:
        arrays: arrays hashed in order, dtype and shape included
        algorithm: 哈希算法 (md5, sha1, sha256)
        prefix: extra text mixed into the digest

    Returns:
        str: 哈希值
    """
    hash_func = getattr(hashlib, algorithm)()
    hash_func.update(prefix.encode("utf-8"))
    for array in arrays:
        array = np.ascontiguousarray(array)
        hash_func.update(f"{array.dtype.str}{array.shape}".encode("utf-8"))
        hash_func.update(array.tobytes())
    return hash_func.hexdigest()


def format_duration(seconds: float) -> str:
    """
    格式化时间间隔

    Args:
        seconds: 秒数

    Returns:
        str: 格式化后的时间
    """
    if seconds < 1e-3:
        return f"{seconds * 1e6:.1f}us"
    if seconds < 1:
        return f"{seconds * 1e3:.1f}ms"
    if seconds < 60:
        return f"{seconds:.2f}s"
    if seconds < 3600:
        return f"{seconds / 60:.1f}min"
    return f"{seconds / 3600:.1f}h"


def format_scalar(value: Union[float, complex], digits: int = 6) -> str:
    """Render a real or complex scalar; real values print without an imaginary part"""
    value = complex(value)
    if value.imag == 0:
        return f"{value.real:.{digits}g}"
    sign = "+" if value.imag >= 0 else "-"
    return f"{value.real:.{digits}g}{sign}{abs(value.imag):.{digits}g}i"


def _read_integers(path: str, what: str) -> List[int]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            tokens: List[str] = []
            for line in f:
                line = line.split("#", 1)[0]
                tokens.extend(t for t in line.replace(",", " ").split() if t)
    except OSError as e:
        raise ConfigError(f"cannot read {what} file {path}: {e}", path=path)

    try:
        values = [int(t) for t in tokens]
    except ValueError as e:
        raise ConfigError(f"{what} file {path} holds a non-integer entry: {e}", path=path)
    if not values:
        raise ConfigError(f"{what} file {path} is empty", path=path)
    return values


def load_index_file(path: str, order: Optional[int] = None) -> np.ndarray:
    """
    Read 0-based row indices, whitespace or comma separated, ``#`` comments allowed

    Raises:
        ConfigError: unreadable file, empty list or index out of range
    """
    indices = np.array(sorted(set(_read_integers(path, "index"))), dtype=np.int64)
    if indices[0] < 0 or (order is not None and indices[-1] >= order):
        raise ConfigError(f"index file {path} has indices outside [0, {order})", path=path)
    return indices


def load_entry_file(path: str, order: Optional[int] = None) -> List[Tuple[int, int]]:
    """
    Read 0-based (row, column) pairs, one ``i j`` or ``i,j`` per line.

    File order is kept and repeated pairs are dropped.

    Raises:
        ConfigError: unreadable file, odd number of integers or an index out of range
    """
    values = _read_integers(path, "entry")
    if len(values) % 2:
        raise ConfigError(f"entry file {path} must hold (row, column) pairs", path=path)
    entries = list(dict.fromkeys(zip(values[0::2], values[1::2])))
    for i, j in entries:
        if min(i, j) < 0 or (order is not None and max(i, j) >= order):
            raise ConfigError(f"entry file {path} has entry ({i}, {j}) outside [0, {order})", path=path)
    return entries


def ensure_parent_dir(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def get_current_local_time(local_timezone: Optional[str] = None) -> str:
    """
    获取当前本地时间

    Args:
        local_timezone: IANA timezone name, UTC when omitted or unknown

    Returns:
        str: ISO-8601 timestamp with offset
    """
    try:
        target_tz = pytz.timezone(local_timezone) if local_timezone else pytz.UTC
    except pytz.exceptions.UnknownTimeZoneError:
        target_tz = pytz.UTC
    return datetime.now(target_tz).isoformat(timespec="seconds")
