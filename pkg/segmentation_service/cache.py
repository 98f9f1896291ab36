import hashlib
import json
import threading
import time
from functools import wraps

_cache = {}
_lock = threading.Lock()


def payload_key(*args, **kwargs) -> str:
    """Stable key for JSON-like request payloads (dicts are not hashable)"""
    text = json.dumps([args, kwargs], sort_keys=True, default=str)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def cached_response(ttl=3600, key=payload_key):
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            cache_key = (func.__name__, key(*args, **kwargs))
            now = time.time()

            with _lock:
                if cache_key in _cache:
                    value, timestamp = _cache[cache_key]
                    if now - timestamp < ttl:
                        return value

            result = func(*args, **kwargs)
            with _lock:
                _cache[cache_key] = (result, now)
            return result

        return wrapper
    return decorator


def clear_cache():
    with _lock:
        _cache.clear()
