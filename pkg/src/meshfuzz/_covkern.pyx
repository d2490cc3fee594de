# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled coverage kernels.

Same contract as _covkern_py: classify raw hit counts into the 8-level
bucket table, fold classified maps into virgin masks, count covered edges.
Single-pass C loops; no numpy dependency at build time (plain buffers).
"""

BACKEND = "cython"

cdef unsigned char BUCKET_TABLE[256]
cdef unsigned char BUCKET_BIT[8]


def _init_tables():
    cdef int count, bucket
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
        BUCKET_TABLE[count] = <unsigned char> bucket
    BUCKET_BIT[0] = 0
    for bucket in range(1, 8):
        BUCKET_BIT[bucket] = <unsigned char> (1 << bucket)


_init_tables()


def classify_inplace(unsigned char[::1] cells):
    """Replace raw hit counts with bucket indices, in place."""
    cdef Py_ssize_t i, n = cells.shape[0]
    for i in range(n):
        cells[i] = BUCKET_TABLE[cells[i]]


def update_virgin(const unsigned char[::1] cells, unsigned char[::1] masks):
    """Fold one classified map into the virgin masks; return new-edge count."""
    cdef Py_ssize_t i, n = cells.shape[0]
    cdef int new_edges = 0
    cdef unsigned char bit
    for i in range(n):
        if cells[i]:
            bit = BUCKET_BIT[cells[i] & 7]
            if not (masks[i] & bit):
                masks[i] = masks[i] | bit
                new_edges += 1
    return new_edges


def count_covered(const unsigned char[::1] masks):
    """Number of edges with at least one observed bucket."""
    cdef Py_ssize_t i, n = masks.shape[0]
    cdef int covered = 0
    for i in range(n):
        if masks[i]:
            covered += 1
    return covered
