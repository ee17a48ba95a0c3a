# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled row scatter-add used by gather backward, embeddings and graph aggregation."""
import numpy as np

ctypedef fused real:
    float
    double


def scatter_add_rows(real[:, ::1] out, const long long[::1] index, const real[:, ::1] src):
    """out[index[i], :] += src[i, :] for every i, in order."""
    cdef Py_ssize_t n = index.shape[0]
    cdef Py_ssize_t d = src.shape[1]
    cdef Py_ssize_t rows = out.shape[0]
    cdef Py_ssize_t i, j, r
    if src.shape[0] != n or out.shape[1] != d:
        raise ValueError("scatter_add_rows: shape mismatch")
    for i in range(n):
        r = index[i]
        if r < 0 or r >= rows:
            raise IndexError("scatter_add_rows: index out of range")
    with nogil:
        for i in range(n):
            r = index[i]
            for j in range(d):
                out[r, j] += src[i, j]
