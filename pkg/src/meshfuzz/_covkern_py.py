"""Pure-Python (numpy) coverage kernels.

Fallback implementation of the hot per-execution bitmap operations; the
compiled variant in _covkern.pyx has identical signatures and semantics.
Cells hold raw hit counts before classification and bucket indices 0-7 after.

Bucket table: 0 hits -> 0, 1 -> 1, 2 -> 2, 3-4 -> 3, 5-8 -> 4, 9-16 -> 5,
17-32 -> 6, more than 32 -> 7.
"""

import numpy as np

BACKEND = "python"


def _build_bucket_table() -> np.ndarray:
    table = np.zeros(256, dtype=np.uint8)
    for count in range(256):
        if count == 0:
            bucket = 0
        elif count == 1:
            bucket = 1
        elif count == 2:
            bucket = 2
        elif count <= 4:
            bucket = 3
        elif count <= 8:
            bucket = 4
        elif count <= 16:
            bucket = 5
        elif count <= 32:
            bucket = 6
        else:
            bucket = 7
        table[count] = bucket
    return table


BUCKET_TABLE = _build_bucket_table()

# Bucket index -> virgin-mask bit. Bucket 0 (unhit) never marks the mask.
BUCKET_BIT = np.array([0, 2, 4, 8, 16, 32, 64, 128], dtype=np.uint8)


def classify_inplace(cells: np.ndarray) -> None:
    """Replace raw hit counts with bucket indices, in place."""
    cells[:] = BUCKET_TABLE[cells]


def update_virgin(cells: np.ndarray, masks: np.ndarray) -> int:
    """Fold one classified map into the virgin masks.

    Sets bit b of masks[e] for every edge e with nonzero bucket b and
    returns the number of edges that gained at least one new bit.
    """
    bits = BUCKET_BIT[cells]
    fresh = bits & ~masks
    new_edges = int(np.count_nonzero(fresh))
    if new_edges:
        np.bitwise_or(masks, bits, out=masks)
    return new_edges


def count_covered(masks: np.ndarray) -> int:
    """Number of edges with at least one observed bucket."""
    return int(np.count_nonzero(masks))
