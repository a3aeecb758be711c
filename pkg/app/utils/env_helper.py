import os
from typing import Callable, Optional, TypeVar

from dotenv import load_dotenv

load_dotenv()

T = TypeVar("T")

TRUE_WORDS = ("true", "1", "yes", "on")
FALSE_WORDS = ("false", "0", "no", "off")


def env_none_or_str(name: str, default=None):
    value = os.getenv(name)
    if value is None or value.strip().lower() in ("", "none"):
        return default
    return value.strip()


def _env_parsed(name: str, parse: Callable[[str], T]) -> Optional[T]:
    value = env_none_or_str(name)
    return None if value is None else parse(value)


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in TRUE_WORDS:
        return True
    if lowered in FALSE_WORDS:
        return False
    raise ValueError(f"expected one of {', '.join(TRUE_WORDS + FALSE_WORDS)}, got {value!r}")


def env_bool(name: str) -> Optional[bool]:
    """None when unset; ValueError for anything that is not a yes/no word."""
    return _env_parsed(name, _parse_bool)


def env_float(name: str) -> Optional[float]:
    return _env_parsed(name, float)


def env_int(name: str) -> Optional[int]:
    return _env_parsed(name, int)
