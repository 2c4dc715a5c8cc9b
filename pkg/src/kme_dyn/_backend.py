"""Pick the kernel-sum backend once, at import.

The compiled ``_ckernels`` extension is preferred. Setting the environment
variable ``KME_DYN_PURE_PYTHON=1`` forces the numpy fallback, which is also
used whenever the extension was not built.
"""

import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

if os.environ.get("KME_DYN_PURE_PYTHON", "").strip() not in ("", "0"):
    impl = _pykernels
else:
    try:
        from . import _ckernels as impl
    except ImportError:  # extension not built
        logger.debug("compiled kernels unavailable, using numpy fallback")
        impl = _pykernels

BACKEND = impl.NAME
gram = impl.gram
weighted_sum = impl.weighted_sum


def available():
    """Return the backend modules importable in this environment, fallback first."""
    mods = [_pykernels]
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        mods.append(_ckernels)
    return mods
