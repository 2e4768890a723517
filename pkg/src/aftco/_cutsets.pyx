# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled cut-set family algebra; same contract as ``_cutsets_py`` for
masks of up to 64 leaves."""
from libc.stdlib cimport malloc, free, qsort

ctypedef unsigned long long u64

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef int _cmp(const void* a, const void* b) noexcept nogil:
    cdef u64 x = (<const u64*>a)[0]
    cdef u64 y = (<const u64*>b)[0]
    cdef int px = __builtin_popcountll(x)
    cdef int py = __builtin_popcountll(y)
    if px != py:
        return -1 if px < py else 1
    if x != y:
        return -1 if x < y else 1
    return 0


cdef Py_ssize_t _minimize(u64* buf, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j, k = 0
    cdef u64 m
    cdef bint subsumed
    qsort(buf, n, sizeof(u64), _cmp)
    for i in range(n):
        m = buf[i]
        subsumed = False
        for j in range(k):
            if buf[j] & m == buf[j]:
                subsumed = True
                break
        if not subsumed:
            buf[k] = m
            k += 1
    return k


cdef list _collect(u64* buf, Py_ssize_t k):
    return [buf[i] for i in range(k)]


def minimize(masks):
    cdef Py_ssize_t n = len(masks), i = 0, k
    if n == 0:
        return []
    cdef u64* buf = <u64*>malloc(n * sizeof(u64))
    if buf == NULL:
        raise MemoryError()
    try:
        for m in masks:
            buf[i] = m
            i += 1
        k = _minimize(buf, n)
        return _collect(buf, k)
    finally:
        free(buf)


def union(a, b):
    return minimize(list(a) + list(b))


def product(a, b):
    cdef Py_ssize_t na = len(a), nb = len(b), i, j, k
    if na == 0 or nb == 0:
        return []
    cdef u64* xa = <u64*>malloc(na * sizeof(u64))
    cdef u64* xb = <u64*>malloc(nb * sizeof(u64))
    cdef u64* buf = <u64*>malloc(na * nb * sizeof(u64))
    if xa == NULL or xb == NULL or buf == NULL:
        free(xa); free(xb); free(buf)
        raise MemoryError()
    try:
        for i in range(na):
            xa[i] = a[i]
        for j in range(nb):
            xb[j] = b[j]
        with nogil:
            for i in range(na):
                for j in range(nb):
                    buf[i * nb + j] = xa[i] | xb[j]
            k = _minimize(buf, na * nb)
        return _collect(buf, k)
    finally:
        free(xa); free(xb); free(buf)
