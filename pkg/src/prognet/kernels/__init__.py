"""Bit packing kernels with backend selection at import time.

The compiled extension is preferred; the numpy fallback is used when the
extension is absent or when PROGRNET_PURE is set to a non-empty value
other than "0".
"""

import os

from . import fallback

if os.environ.get("PROGRNET_PURE", "0") not in ("", "0"):
    pack_bits = fallback.pack_bits
    unpack_bits = fallback.unpack_bits
    BACKEND = "python"
else:
    try:
        from ._bitpack import pack_bits, unpack_bits
        BACKEND = "cython"
    except ImportError:
        pack_bits = fallback.pack_bits
        unpack_bits = fallback.unpack_bits
        BACKEND = "python"

__all__ = ["pack_bits", "unpack_bits", "BACKEND", "fallback"]
