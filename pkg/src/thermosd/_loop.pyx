# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sigma-delta loop kernel."""


def run_loop(const double[::1] power, const double[::1] noise, signed char[::1] bits,
             double state, double pole, double gain, double s_wheat, double p_comp):
    cdef Py_ssize_t i, n = power.shape[0]
    cdef bint noisy = noise.shape[0] > 0
    cdef double v
    cdef signed char b
    if bits.shape[0] < n or (noisy and noise.shape[0] < n):
        raise ValueError("buffer length mismatch")
    with nogil:
        for i in range(n):
            v = s_wheat * state
            if noisy:
                v = v + noise[i]
            b = 1 if v >= 0.0 else -1
            bits[i] = b
            state = pole * state + gain * (power[i] - b * p_comp)
    return state
