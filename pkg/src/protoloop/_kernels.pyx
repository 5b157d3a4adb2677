# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled set-similarity kernels; see _kernels_py for the reference."""

from libc.stdint cimport uint64_t
from libc.stdlib cimport malloc, free

cdef extern from *:
    int popcount64 "__builtin_popcountll"(unsigned long long) nogil

_WORD_MASK = 0xFFFFFFFFFFFFFFFF


cdef int _nwords(masks):
    cdef int top = 1
    cdef int w
    for m in masks:
        w = ((<object>m).bit_length() + 63) // 64
        if w > top:
            top = w
    return top


cdef uint64_t* _pack(masks, int nw) except NULL:
    cdef Py_ssize_t n = len(masks)
    cdef uint64_t* buf = <uint64_t*>malloc(max(n, 1) * nw * sizeof(uint64_t))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    cdef int k
    for i in range(n):
        m = masks[i]
        for k in range(nw):
            buf[i * nw + k] = <uint64_t>((m >> (64 * k)) & _WORD_MASK)
    return buf


cdef inline double _jac(const uint64_t* a, const uint64_t* b, int nw) nogil:
    cdef int k
    cdef long inter = 0
    cdef long uni = 0
    for k in range(nw):
        inter += popcount64(a[k] & b[k])
        uni += popcount64(a[k] | b[k])
    if uni == 0:
        return 1.0
    return <double>inter / <double>uni


def jaccard(a, b):
    cdef int nw = _nwords((a, b))
    cdef uint64_t* buf = _pack((a, b), nw)
    try:
        return _jac(buf, buf + nw, nw)
    finally:
        free(buf)


def mean_pairwise_jaccard(masks):
    cdef Py_ssize_t n = len(masks)
    if n < 2:
        raise ValueError("need at least two signatures")
    cdef int nw = _nwords(masks)
    cdef uint64_t* buf = _pack(masks, nw)
    cdef double total = 0.0
    cdef Py_ssize_t i, j
    try:
        with nogil:
            for i in range(n - 1):
                for j in range(i + 1, n):
                    total += _jac(buf + i * nw, buf + j * nw, nw)
        return total / <double>(n * (n - 1) // 2)
    finally:
        free(buf)


cdef double _max_jac(const uint64_t* a, const uint64_t* refs, Py_ssize_t nr, int nw) nogil:
    cdef double best = 0.0
    cdef double s
    cdef Py_ssize_t r
    for r in range(nr):
        s = _jac(a, refs + r * nw, nw)
        if s > best:
            best = s
    return best


def max_jaccard(mask, refs):
    cdef Py_ssize_t nr = len(refs)
    if nr == 0:
        raise ValueError("empty reference")
    cdef int nw = max(_nwords((mask,)), _nwords(refs))
    cdef uint64_t* mb = _pack((mask,), nw)
    cdef uint64_t* rb
    try:
        rb = _pack(refs, nw)
    except MemoryError:
        free(mb)
        raise
    try:
        return _max_jac(mb, rb, nr, nw)
    finally:
        free(mb)
        free(rb)


def novelties(masks, refs):
    cdef Py_ssize_t n = len(masks)
    cdef Py_ssize_t nr = len(refs)
    if nr == 0:
        raise ValueError("empty reference")
    cdef int nw = max(_nwords(masks), _nwords(refs))
    cdef uint64_t* mb = _pack(masks, nw)
    cdef uint64_t* rb
    try:
        rb = _pack(refs, nw)
    except MemoryError:
        free(mb)
        raise
    cdef Py_ssize_t i
    out = [0.0] * n
    try:
        for i in range(n):
            out[i] = 1.0 - _max_jac(mb + i * nw, rb, nr, nw)
        return out
    finally:
        free(mb)
        free(rb)


def farthest_point_order(masks, Py_ssize_t n, Py_ssize_t first=0):
    cdef Py_ssize_t size = len(masks)
    if size == 0 or n <= 0:
        return []
    if n > size:
        n = size
    cdef int nw = _nwords(masks)
    cdef uint64_t* buf = _pack(masks, nw)
    cdef double* near = <double*>malloc(size * sizeof(double))
    if near == NULL:
        free(buf)
        raise MemoryError()
    cdef Py_ssize_t i, pick, count
    cdef double best, d
    chosen = [first]
    try:
        for i in range(size):
            near[i] = 1.0 - _jac(buf + first * nw, buf + i * nw, nw)
        near[first] = -1.0
        count = 1
        while count < n:
            pick = -1
            best = -1.0
            for i in range(size):
                if near[i] > best:
                    best = near[i]
                    pick = i
            chosen.append(pick)
            count += 1
            near[pick] = -1.0
            for i in range(size):
                if near[i] >= 0.0:
                    d = 1.0 - _jac(buf + pick * nw, buf + i * nw, nw)
                    if d < near[i]:
                        near[i] = d
        return chosen
    finally:
        free(buf)
        free(near)
