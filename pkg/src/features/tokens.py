from __future__ import annotations

import re

# path separators, dots, whitespace, colons, pipes
_SPLIT = re.compile(r"[/\\.\s:|]+")


def tokenize_attribute(text: str) -> list[str]:
    """
    Split an entity attribute (path, command line, netflow tuple) into tokens.
    e.g. '/home/admin/profile' -> ['home', 'admin', 'profile']
    """
    if not text:
        return []
    return [tok for tok in _SPLIT.split(text.lower()) if tok]
