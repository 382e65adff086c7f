# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for bit-packed mask algebra.

Mask rows are little-endian bit-packed uint8 (column j lives at byte
j // 8, bit j % 8). The kernels walk set bits with count-trailing-zeros,
so the cost scales with the number of ones rather than with n. Words are
assembled byte-by-byte, which keeps the bit indexing correct regardless
of host byte order.

Accumulation order is fixed (rows ascending, columns ascending), so all
results are bit-for-bit deterministic.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil
    int __builtin_popcountll(unsigned long long) nogil

ctypedef unsigned long long u64
ctypedef unsigned char u8


cdef inline u64 _load_word(const u8 *p, Py_ssize_t nbytes) nogil:
    # Assemble up to 8 packed bytes into one word, low byte first.
    cdef u64 w = 0
    cdef Py_ssize_t i
    for i in range(nbytes):
        w |= (<u64> p[i]) << (8 * i)
    return w


def q_matvec(const u8[:, ::1] packed, Py_ssize_t n, const double complex[::1] x):
    """Apply the mask matrix: out[m] = sum of x[j] over set bits of row m."""
    cdef Py_ssize_t m = packed.shape[0]
    cdef Py_ssize_t nbytes = packed.shape[1]
    if x.shape[0] != n:
        raise ValueError("x has wrong length")
    out_arr = np.zeros(m, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t row, w0, base, nb
    cdef u64 w, tail_mask
    cdef double complex acc
    cdef const u8 *rp
    cdef Py_ssize_t nwords = (nbytes + 7) // 8
    cdef Py_ssize_t tail_bits = n - 64 * (nwords - 1)
    tail_mask = <u64> 0xFFFFFFFFFFFFFFFF if tail_bits >= 64 else ((<u64> 1 << tail_bits) - 1)
    with nogil:
        for row in range(m):
            rp = &packed[row, 0]
            acc = 0
            for w0 in range(nwords):
                nb = nbytes - 8 * w0
                if nb > 8:
                    nb = 8
                w = _load_word(rp + 8 * w0, nb)
                if w0 == nwords - 1:
                    w &= tail_mask
                base = 64 * w0
                while w:
                    acc = acc + x[base + __builtin_ctzll(w)]
                    w &= w - 1
            out[row] = acc
    return out_arr


def qt_matvec(const u8[:, ::1] packed, Py_ssize_t n, const double complex[::1] y):
    """Apply the transpose: out[j] = sum of y[m] over rows with bit j set."""
    cdef Py_ssize_t m = packed.shape[0]
    cdef Py_ssize_t nbytes = packed.shape[1]
    if y.shape[0] != m:
        raise ValueError("y has wrong length")
    out_arr = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t row, w0, base, nb
    cdef u64 w, tail_mask
    cdef double complex ym
    cdef const u8 *rp
    cdef Py_ssize_t nwords = (nbytes + 7) // 8
    cdef Py_ssize_t tail_bits = n - 64 * (nwords - 1)
    tail_mask = <u64> 0xFFFFFFFFFFFFFFFF if tail_bits >= 64 else ((<u64> 1 << tail_bits) - 1)
    with nogil:
        for row in range(m):
            ym = y[row]
            if ym == 0:
                continue
            rp = &packed[row, 0]
            for w0 in range(nwords):
                nb = nbytes - 8 * w0
                if nb > 8:
                    nb = 8
                w = _load_word(rp + 8 * w0, nb)
                if w0 == nwords - 1:
                    w &= tail_mask
                base = 64 * w0
                while w:
                    out[base + __builtin_ctzll(w)] += ym
                    w &= w - 1
    return out_arr


def row_popcounts(const u8[:, ::1] packed, Py_ssize_t n):
    """Number of set bits in each row (tail padding excluded)."""
    cdef Py_ssize_t m = packed.shape[0]
    cdef Py_ssize_t nbytes = packed.shape[1]
    out_arr = np.zeros(m, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t row, w0, nb
    cdef u64 w, tail_mask
    cdef long long acc
    cdef const u8 *rp
    cdef Py_ssize_t nwords = (nbytes + 7) // 8
    cdef Py_ssize_t tail_bits = n - 64 * (nwords - 1)
    tail_mask = <u64> 0xFFFFFFFFFFFFFFFF if tail_bits >= 64 else ((<u64> 1 << tail_bits) - 1)
    with nogil:
        for row in range(m):
            rp = &packed[row, 0]
            acc = 0
            for w0 in range(nwords):
                nb = nbytes - 8 * w0
                if nb > 8:
                    nb = 8
                w = _load_word(rp + 8 * w0, nb)
                if w0 == nwords - 1:
                    w &= tail_mask
                acc += __builtin_popcountll(w)
            out[row] = acc
    return out_arr
