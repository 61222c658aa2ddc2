# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Hot loops of the separable exact Euclidean distance transform.

`axis0_pass` turns the binary seed volume into per-line squared distances
along axis 0 (two monotone sweeps). `envelope_pass_3d` applies one
lower-envelope (parabola) scan along a chosen axis, in place, optionally
taking the square root on the way out (for the final pass). Lines are
visited innermost-axis-last so neighboring lines share cache lines.
"""

from libc.math cimport sqrt
from libc.stdlib cimport free, malloc

DEF BOUND_INF = 1e308


cdef inline void _line_sweep(const unsigned char* seed, double* out,
                             Py_ssize_t n, Py_ssize_t stride, double w,
                             double big) nogil:
    cdef Py_ssize_t i
    cdef double last, d, pos
    last = -1e308
    for i in range(n):
        pos = i * w
        if seed[i * stride] != 0:
            last = pos
        d = pos - last
        out[i] = d * d if last > -1e307 else big
    last = 1e308
    for i in range(n - 1, -1, -1):
        pos = i * w
        if seed[i * stride] != 0:
            last = pos
        if last < 1e307:
            d = last - pos
            d = d * d
            if d < out[i]:
                out[i] = d


def axis0_pass(const unsigned char[:, :, ::1] surface,
               double[:, :, ::1] d2, double w0, double big):
    """Squared distance to the nearest seed along axis 0, per line."""
    cdef Py_ssize_t n0 = surface.shape[0], n1 = surface.shape[1]
    cdef Py_ssize_t n2 = surface.shape[2]
    cdef Py_ssize_t j, k, t
    cdef Py_ssize_t stride = n1 * n2
    cdef double* buf = <double*> malloc(n0 * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for j in range(n1):
                for k in range(n2):
                    _line_sweep(&surface[0, j, k], buf, n0, stride, w0, big)
                    for t in range(n0):
                        d2[t, j, k] = buf[t]
    finally:
        free(buf)


cdef inline void _line_envelope(const double* f, double* out, Py_ssize_t n,
                                double w2, Py_ssize_t* v, double* z,
                                bint do_sqrt) nogil:
    cdef Py_ssize_t q, i, k, vk
    cdef double s, fq
    k = 0
    v[0] = 0
    z[0] = -BOUND_INF
    z[1] = BOUND_INF
    for q in range(1, n):
        fq = f[q] + w2 * q * q
        while True:
            vk = v[k]
            s = (fq - (f[vk] + w2 * vk * vk)) / (2.0 * w2 * (q - vk))
            if s <= z[k] and k > 0:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = BOUND_INF
    k = 0
    for i in range(n):
        while z[k + 1] < i:
            k += 1
        vk = v[k]
        s = f[vk] + w2 * (i - vk) * (i - vk)
        out[i] = sqrt(s) if do_sqrt else s


def plane_passes(double[:, :, :] d2, double w1, double w2,
                 bint final_sqrt=True):
    """Envelope passes along axes 1 then 2, fused per axis-0 plane.

    Both passes only touch data within one plane, so running them
    back-to-back keeps the plane cache-resident and saves a volume-wide
    round trip.
    """
    cdef Py_ssize_t n0 = d2.shape[0], n1 = d2.shape[1], n2 = d2.shape[2]
    cdef Py_ssize_t i, j, k, t
    cdef Py_ssize_t n = n1 if n1 > n2 else n2
    cdef double w1sq = w1 * w1, w2sq = w2 * w2
    cdef Py_ssize_t* v = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef double* z = <double*> malloc((n + 1) * sizeof(double))
    cdef double* f = <double*> malloc(n * sizeof(double))
    cdef double* o = <double*> malloc(n * sizeof(double))
    if v == NULL or z == NULL or f == NULL or o == NULL:
        free(v); free(z); free(f); free(o)
        raise MemoryError()
    try:
        with nogil:
            for i in range(n0):
                for k in range(n2):
                    for t in range(n1):
                        f[t] = d2[i, t, k]
                    _line_envelope(f, o, n1, w1sq, v, z, False)
                    for t in range(n1):
                        d2[i, t, k] = o[t]
                for j in range(n1):
                    for t in range(n2):
                        f[t] = d2[i, j, t]
                    _line_envelope(f, o, n2, w2sq, v, z, final_sqrt)
                    for t in range(n2):
                        d2[i, j, t] = o[t]
    finally:
        free(v); free(z); free(f); free(o)


def envelope_pass_3d(double[:, :, :] d2, int axis, double w,
                     bint final_sqrt=False):
    """In-place envelope pass along ``axis``; final_sqrt emits distances."""
    cdef Py_ssize_t n0 = d2.shape[0], n1 = d2.shape[1], n2 = d2.shape[2]
    cdef Py_ssize_t n, i, j, k, t
    cdef double w2 = w * w
    if axis == 0:
        n = n0
    elif axis == 1:
        n = n1
    else:
        n = n2
    cdef Py_ssize_t* v = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef double* z = <double*> malloc((n + 1) * sizeof(double))
    cdef double* f = <double*> malloc(n * sizeof(double))
    cdef double* o = <double*> malloc(n * sizeof(double))
    if v == NULL or z == NULL or f == NULL or o == NULL:
        free(v); free(z); free(f); free(o)
        raise MemoryError()
    try:
        with nogil:
            if axis == 0:
                for j in range(n1):
                    for k in range(n2):
                        for t in range(n):
                            f[t] = d2[t, j, k]
                        _line_envelope(f, o, n, w2, v, z, final_sqrt)
                        for t in range(n):
                            d2[t, j, k] = o[t]
            elif axis == 1:
                for i in range(n0):
                    for k in range(n2):
                        for t in range(n):
                            f[t] = d2[i, t, k]
                        _line_envelope(f, o, n, w2, v, z, final_sqrt)
                        for t in range(n):
                            d2[i, t, k] = o[t]
            else:
                for i in range(n0):
                    for j in range(n1):
                        for t in range(n):
                            f[t] = d2[i, j, t]
                        _line_envelope(f, o, n, w2, v, z, final_sqrt)
                        for t in range(n):
                            d2[i, j, t] = o[t]
    finally:
        free(v); free(z); free(f); free(o)
