"""Named deterministic random streams.

All randomness in the package flows from one master seed. Sub-streams are
addressed by name so that independent components never share or race on a
generator, and so that serial and parallel execution agree.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(*names) -> int:
    digest = hashlib.sha256("/".join(str(n) for n in names).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master_seed: int, *names) -> np.random.Generator:
    """Generator for the sub-stream addressed by the given name parts."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), stream_key(*names)]))
