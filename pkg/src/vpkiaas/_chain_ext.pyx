# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled pseudonym chain kernel; same contract as ``_chain_py``."""

from libc.stdint cimport int64_t, uint32_t
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy


cdef extern from "openssl/sha.h":
    unsigned char *SHA256(const unsigned char *d, size_t n, unsigned char *md) nogil


cdef inline size_t put_len(unsigned char *buf, uint32_t n) nogil:
    buf[0] = (n >> 24) & 0xFF
    buf[1] = (n >> 16) & 0xFF
    buf[2] = (n >> 8) & 0xFF
    buf[3] = n & 0xFF
    return 4


cdef inline size_t put_field(unsigned char *buf, const unsigned char *src, uint32_t n) nogil:
    put_len(buf, n)
    memcpy(buf + 4, src, n)
    return 4 + n


cdef inline size_t put_i64(unsigned char *buf, int64_t v) nogil:
    cdef unsigned long long u = <unsigned long long>v
    cdef int j
    put_len(buf, 8)
    for j in range(8):
        buf[4 + j] = (u >> (56 - 8 * j)) & 0xFF
    return 12


def derive_chain(bytes ik_tkt, public_keys, long long slot_start, long long tau, bytes rnd_v):
    cdef Py_ssize_t n = len(public_keys)
    cdef Py_ssize_t i, kmax = 0
    cdef bytes k
    keys = [bytes(x) for x in public_keys]
    for k in keys:
        if len(k) > kmax:
            kmax = len(k)

    cdef size_t cap = 4 + len(ik_tkt) + 4 + kmax + 12 + 12 + 4 + 32
    if cap < 72:
        cap = 72
    cdef unsigned char *buf = <unsigned char *>malloc(cap)
    if buf == NULL:
        raise MemoryError()

    cdef unsigned char h[32]
    cdef unsigned char ik[32]
    cdef unsigned char sn[32]
    cdef unsigned char prev[32]
    cdef size_t pos
    cdef long long t = slot_start
    cdef const unsigned char *ikt = ik_tkt
    cdef Py_ssize_t ikt_len = len(ik_tkt)
    cdef const unsigned char *kp
    cdef Py_ssize_t klen

    hashes = []
    iks = []
    serials = []
    try:
        SHA256(<const unsigned char *>rnd_v, len(rnd_v), h)
        for i in range(n):
            if i > 0:
                SHA256(h, 32, h)
            k = keys[i]
            kp = k
            klen = len(k)
            pos = put_field(buf, ikt, <uint32_t>ikt_len)
            pos += put_field(buf + pos, kp, <uint32_t>klen)
            pos += put_i64(buf + pos, t)
            pos += put_i64(buf + pos, t + tau)
            pos += put_field(buf + pos, h, 32)
            SHA256(buf, pos, ik)
            if i == 0:
                pos = put_field(buf, ik, 32)
            else:
                pos = put_field(buf, prev, 32)
            pos += put_field(buf + pos, h, 32)
            SHA256(buf, pos, sn)
            memcpy(prev, sn, 32)
            hashes.append(h[:32])
            iks.append(ik[:32])
            serials.append(sn[:32])
            t += tau
    finally:
        free(buf)
    return hashes, iks, serials


def chain_serials(bytes first_serial, bytes rnd_v, Py_ssize_t n):
    cdef unsigned char h[32]
    cdef unsigned char prev[32]
    cdef unsigned char buf[72]
    cdef Py_ssize_t i
    cdef size_t pos
    if n <= 0:
        return []
    if len(first_serial) != 32:
        raise ValueError("serial must be 32 bytes")
    out = [first_serial]
    memcpy(prev, <const unsigned char *>first_serial, 32)
    SHA256(<const unsigned char *>rnd_v, len(rnd_v), h)
    for i in range(1, n):
        SHA256(h, 32, h)
        pos = put_field(buf, prev, 32)
        pos += put_field(buf + pos, h, 32)
        SHA256(buf, pos, prev)
        out.append(prev[:32])
    return out
