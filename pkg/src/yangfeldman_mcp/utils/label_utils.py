"""
Label utility functions.
"""

from typing import Sequence, Tuple


def format_label(label: Sequence[int]) -> str:
    """
    Render a label as a dot sequence, e.g. (2, 1, 3) -> "2.1.3".

    Args:
        label: Sequence of 1-based child positions

    Returns:
        Dot-separated string; the empty label renders as "root"
    """
    if not label:
        return "root"
    return ".".join(str(part) for part in label)


def parse_label(text: str) -> Tuple[int, ...]:
    """Inverse of format_label."""
    if text in ("", "root"):
        return ()
    return tuple(int(part) for part in text.split("."))


def compare_labels(first: Sequence[int], second: Sequence[int]) -> int:
    """
    Compare two labels at their first mismatch.

    A label that is a prefix of the other one sorts first.

    Returns:
        -1, 0 or 1 like a classic cmp
    """
    for a, b in zip(first, second):
        if a != b:
            return -1 if a < b else 1
    if len(first) == len(second):
        return 0
    return -1 if len(first) < len(second) else 1


def extend_label(parent: Sequence[int], position: int) -> Tuple[int, ...]:
    """Child label: the parent label followed by the 1-based child position."""
    return tuple(parent) + (position,)
