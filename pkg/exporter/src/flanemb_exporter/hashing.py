"""64-bit FNV-1a, the shared key function between exporter and consumer."""

_OFFSET = 0xCBF29CE484222325
_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    h = _OFFSET
    for byte in data:
        h ^= byte
        h = (h * _PRIME) & _MASK
    return h


def text_key(text: str) -> int:
    return fnv1a_64(text.encode("utf-8"))
