"""
Core functions
"""
import hashlib
import json
import os
from argparse import Namespace
from concurrent.futures import ThreadPoolExecutor
from os import path
from typing import Any, Callable, Iterable, List, TypeVar

import settings
from .errors import ConfigError, OutputPathError

__all__ = [
    "Namespace",
    "get_arg_option",
    "get_workers",
    "parallel_map",
    "canonical_json",
    "config_hash",
    "ensure_output_dir",
]

T = TypeVar("T")
R = TypeVar("R")


def get_arg_option(name: str, args: Namespace, set_type, default):
    """Retrieve and type-cast an optional argument value with a default fallback.

    Args:
        name: The name of the argument to retrieve.
        args: The argparse Namespace object containing parsed arguments.
        set_type: A callable to convert the argument value to the desired type.
        default: The default value to return if the argument is missing or None.

    Returns:
        The argument value converted using set_type, or the default value.
    """
    args_dict = vars(args)
    if (name in args_dict) and (args_dict[name] is not None):
        return set_type(args_dict[name])
    return default


def get_workers(value) -> int:
    """Worker count from a CLI value, falling back to ``settings.default_workers``."""
    if value is None:
        value = getattr(settings, "default_workers", 1)
    workers = int(value)
    if workers < 1:
        raise ConfigError("--workers must be at least 1, got %d" % workers)
    return workers


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """Apply ``fn`` to every item, in a thread pool when ``workers > 1``.

    Results come back in input order whatever the completion order, so the
    worker count never changes what callers aggregate.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as executor:
        return list(executor.map(fn, items))


def canonical_json(data: Any) -> str:
    """Sorted, whitespace-free JSON used for hashing."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(data: Any) -> str:
    """SHA-256 hex digest of :func:`canonical_json`."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def ensure_output_dir(directory: str) -> str:
    """Create ``directory`` if needed and check it is writable.

    Raises:
        OutputPathError: When the directory cannot be created or written.
    """
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise OutputPathError("cannot create output directory %s: %s" % (directory, exc)) from exc
    if not path.isdir(directory) or not os.access(directory, os.W_OK):
        raise OutputPathError("output directory %s is not writable" % directory)
    return directory
