# cython: language_level=3
"""Compiled chunk kernels: 5/3 lifting, fragment packing, keystream masking.

Bit-identical to ``_fallback``; every loop runs without the GIL so chunk
workers in a thread pool execute in parallel.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint8_t, int16_t, int32_t, int64_t, uint16_t, uint64_t
from libc.string cimport memcpy, memset

from .errors import CoefficientRangeError

cnp.import_array()

NAME = "cython"

cdef extern from "openssl/sha.h" nogil:
    ctypedef struct SHA256_CTX:
        pass
    ctypedef struct SHA512_CTX:
        pass
    int SHA256_Init(SHA256_CTX *c)
    int SHA256_Update(SHA256_CTX *c, const void *data, size_t n)
    int SHA256_Final(unsigned char *md, SHA256_CTX *c)
    int SHA512_Init(SHA512_CTX *c)
    int SHA512_Update(SHA512_CTX *c, const void *data, size_t n)
    int SHA512_Final(unsigned char *md, SHA512_CTX *c)


cdef uint16_t CRC_TABLE[256]

cdef void _init_crc():
    cdef int i, j
    cdef uint16_t crc
    for i in range(256):
        crc = <uint16_t>(i << 8)
        for j in range(8):
            if crc & 0x8000:
                crc = <uint16_t>((crc << 1) ^ 0x1021)
            else:
                crc = <uint16_t>(crc << 1)
        CRC_TABLE[i] = crc

_init_crc()


cdef inline uint16_t _crc_update(uint16_t crc, const uint8_t *p, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        crc = <uint16_t>(((crc << 8) & 0xFFFF) ^ CRC_TABLE[((crc >> 8) ^ p[i]) & 0xFF])
    return crc


# -- lifting -------------------------------------------------------------------

cdef inline void _lift_fwd(int32_t *x, int n, int stride) noexcept nogil:
    cdef int32_t t[8]
    cdef int32_t s[4]
    cdef int32_t d[4]
    cdef int k, h = n // 2
    cdef int32_t right, left
    for k in range(n):
        t[k] = x[k * stride]
    for k in range(h):
        right = t[2 * k + 2] if 2 * k + 2 < n else t[n - 2]
        d[k] = t[2 * k + 1] - ((t[2 * k] + right) >> 1)
    for k in range(h):
        left = d[k - 1] if k > 0 else d[0]
        s[k] = t[2 * k] + ((left + d[k] + 2) >> 2)
    for k in range(h):
        x[k * stride] = s[k]
        x[(h + k) * stride] = d[k]


cdef inline void _lift_inv(int32_t *x, int n, int stride) noexcept nogil:
    cdef int32_t e[4]
    cdef int32_t s[4]
    cdef int32_t d[4]
    cdef int k, h = n // 2
    cdef int32_t right, left
    for k in range(h):
        s[k] = x[k * stride]
        d[k] = x[(h + k) * stride]
    for k in range(h):
        left = d[k - 1] if k > 0 else d[0]
        e[k] = s[k] - ((left + d[k] + 2) >> 2)
    for k in range(h):
        right = e[k + 1] if k + 1 < h else e[h - 1]
        x[2 * k * stride] = e[k]
        x[(2 * k + 1) * stride] = d[k] + ((e[k] + right) >> 1)


cdef inline void _fwd_block(const uint8_t *src, int32_t *blk) noexcept nogil:
    cdef int i
    for i in range(64):
        blk[i] = <int32_t>src[i] - 128
    for i in range(8):
        _lift_fwd(blk + 8 * i, 8, 1)
    for i in range(8):
        _lift_fwd(blk + i, 8, 8)
    for i in range(4):
        _lift_fwd(blk + 8 * i, 4, 1)
    for i in range(4):
        _lift_fwd(blk + i, 4, 8)


cdef inline bint _inv_block(int32_t *blk, uint8_t *dst) noexcept nogil:
    cdef int i
    cdef int32_t v
    cdef bint bad = 0
    for i in range(4):
        _lift_inv(blk + i, 4, 8)
    for i in range(4):
        _lift_inv(blk + 8 * i, 4, 1)
    for i in range(8):
        _lift_inv(blk + i, 8, 8)
    for i in range(8):
        _lift_inv(blk + 8 * i, 8, 1)
    for i in range(64):
        v = blk[i] + 128
        if v < 0:
            bad = 1
            v = 0
        elif v > 255:
            bad = 1
            v = 255
        dst[i] = <uint8_t>v
    return bad


def forward_blocks(blocks):
    cdef const uint8_t[:, :, ::1] src = np.ascontiguousarray(blocks, dtype=np.uint8)
    cdef Py_ssize_t n = src.shape[0], b
    out = np.empty((n, 8, 8), dtype=np.int16)
    cdef int16_t[:, :, ::1] dst = out
    cdef int32_t blk[64]
    cdef int i
    with nogil:
        for b in range(n):
            _fwd_block(&src[b, 0, 0], blk)
            for i in range(64):
                dst[b, i // 8, i % 8] = <int16_t>blk[i]
    return out


def inverse_blocks(coeffs):
    cdef const int16_t[:, :, ::1] src = np.ascontiguousarray(coeffs, dtype=np.int16)
    cdef Py_ssize_t n = src.shape[0], b
    out = np.empty((n, 8, 8), dtype=np.uint8)
    flags = np.zeros(n, dtype=bool)
    cdef uint8_t[:, :, ::1] dst = out
    cdef uint8_t[::1] fl = flags.view(np.uint8)
    cdef int32_t blk[64]
    cdef int i
    with nogil:
        for b in range(n):
            for i in range(64):
                blk[i] = src[b, i // 8, i % 8]
            fl[b] = _inv_block(blk, &dst[b, 0, 0])
    return out, flags


# -- packing -------------------------------------------------------------------

# (row*8+col, width) in canonical order: private 4x10, B 8x10 + 4x11, C 48x10
cdef int A_POS[4]
cdef int B_POS[12]
cdef int B_W[12]
cdef int C_POS[48]

cdef void _init_layout():
    cdef int k = 0, r, c
    for r, c in ((0, 0), (0, 1), (1, 0), (1, 1)):
        A_POS[k] = r * 8 + c
        k += 1
    k = 0
    for r, c in ((0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)):
        B_POS[k] = r * 8 + c
        B_W[k] = 10
        k += 1
    for r, c in ((2, 2), (2, 3), (3, 2), (3, 3)):
        B_POS[k] = r * 8 + c
        B_W[k] = 11
        k += 1
    k = 0
    for r in range(4):
        for c in range(4, 8):
            C_POS[k] = r * 8 + c
            k += 1
    for r in range(4, 8):
        for c in range(4):
            C_POS[k] = r * 8 + c
            k += 1
    for r in range(4, 8):
        for c in range(4, 8):
            C_POS[k] = r * 8 + c
            k += 1

_init_layout()


cdef struct BitSink:
    uint8_t *out
    uint64_t acc
    int nacc
    int pos


cdef inline void _put(BitSink *w, uint64_t value, int width) noexcept nogil:
    w.acc = (w.acc << width) | value
    w.nacc += width
    while w.nacc >= 8:
        w.nacc -= 8
        w.out[w.pos] = <uint8_t>((w.acc >> w.nacc) & 0xFF)
        w.pos += 1


cdef inline void _flush(BitSink *w) noexcept nogil:
    if w.nacc:
        w.out[w.pos] = <uint8_t>((w.acc << (8 - w.nacc)) & 0xFF)
        w.pos += 1
        w.nacc = 0


cdef inline int64_t _get(const uint8_t *src, int bitpos, int width) noexcept nogil:
    cdef int64_t v = 0
    cdef int i, p
    for i in range(width):
        p = bitpos + i
        v = (v << 1) | ((src[p >> 3] >> (7 - (p & 7))) & 1)
    return v


def pack_dwt(coeffs):
    cdef const int16_t[:, :, ::1] src = np.ascontiguousarray(coeffs, dtype=np.int16)
    cdef Py_ssize_t n = src.shape[0], b
    a_out = np.zeros((n, 5), dtype=np.uint8)
    b_out = np.zeros((n, 16), dtype=np.uint8)
    c_out = np.zeros((n, 60), dtype=np.uint8)
    cdef uint8_t[:, ::1] av = a_out
    cdef uint8_t[:, ::1] bv = b_out
    cdef uint8_t[:, ::1] cv = c_out
    cdef const int16_t *blk
    cdef int k, w, half
    cdef int32_t v
    cdef BitSink sink
    cdef Py_ssize_t err_block = -1
    cdef int err_pos = 0, err_w = 0
    cdef int32_t err_val = 0
    with nogil:
        for b in range(n):
            blk = &src[b, 0, 0]
            sink.out, sink.acc, sink.nacc, sink.pos = &av[b, 0], 0, 0, 0
            for k in range(4):
                v = blk[A_POS[k]]
                if v < -512 or v > 511:
                    err_block, err_pos, err_w, err_val = b, A_POS[k], 10, v
                    break
                _put(&sink, <uint64_t>(v + 512), 10)
            if err_block >= 0:
                break
            sink.out, sink.acc, sink.nacc, sink.pos = &bv[b, 0], 0, 0, 0
            for k in range(12):
                w = B_W[k]
                half = 1 << (w - 1)
                v = blk[B_POS[k]]
                if v < -half or v >= half:
                    err_block, err_pos, err_w, err_val = b, B_POS[k], w, v
                    break
                _put(&sink, <uint64_t>(v + half), w)
            if err_block >= 0:
                break
            _flush(&sink)
            sink.out, sink.acc, sink.nacc, sink.pos = &cv[b, 0], 0, 0, 0
            for k in range(48):
                v = blk[C_POS[k]]
                if v < -512 or v > 511:
                    err_block, err_pos, err_w, err_val = b, C_POS[k], 10, v
                    break
                _put(&sink, <uint64_t>(v + 512), 10)
            if err_block >= 0:
                break
    if err_block >= 0:
        raise CoefficientRangeError(
            f"block {err_block}: coefficient {err_val} at {(err_pos // 8, err_pos % 8)} does not fit {err_w} bits",
            position=(int(err_block), err_pos // 8, err_pos % 8),
            value=int(err_val),
        )
    return a_out, b_out, c_out


def unpack_dwt(a, b, c):
    cdef const uint8_t[:, ::1] av = np.ascontiguousarray(a, dtype=np.uint8)
    cdef const uint8_t[:, ::1] bv = np.ascontiguousarray(b, dtype=np.uint8)
    cdef const uint8_t[:, ::1] cv = np.ascontiguousarray(c, dtype=np.uint8)
    cdef Py_ssize_t n = av.shape[0], i
    out = np.zeros((n, 8, 8), dtype=np.int16)
    cdef int16_t[:, :, ::1] dst = out
    cdef int16_t *blk
    cdef int k, pos, w
    with nogil:
        for i in range(n):
            blk = &dst[i, 0, 0]
            pos = 0
            for k in range(4):
                blk[A_POS[k]] = <int16_t>(_get(&av[i, 0], pos, 10) - 512)
                pos += 10
            pos = 0
            for k in range(12):
                w = B_W[k]
                blk[B_POS[k]] = <int16_t>(_get(&bv[i, 0], pos, w) - (1 << (w - 1)))
                pos += w
            pos = 0
            for k in range(48):
                blk[C_POS[k]] = <int16_t>(_get(&cv[i, 0], pos, 10) - 512)
                pos += 10
    return out


# -- masking -------------------------------------------------------------------

cdef inline void _address(uint8_t *out, uint64_t chunk_index, Py_ssize_t i, Py_ssize_t bpr) noexcept nogil:
    cdef uint64_t row = <uint64_t>(i // bpr), col = <uint64_t>(i % bpr)
    cdef int k
    for k in range(8):
        out[k] = <uint8_t>((chunk_index >> (8 * (7 - k))) & 0xFF)
    for k in range(4):
        out[8 + k] = <uint8_t>((row >> (8 * (3 - k))) & 0xFF)
        out[12 + k] = <uint8_t>((col >> (8 * (3 - k))) & 0xFF)


cdef inline void _xor_sha256(const SHA256_CTX *base, const uint8_t *addr, const uint8_t *payload,
                             Py_ssize_t plen, uint8_t *target, Py_ssize_t tlen) noexcept nogil:
    cdef SHA256_CTX ctx
    cdef unsigned char md[32]
    cdef Py_ssize_t k
    memcpy(&ctx, base, sizeof(SHA256_CTX))
    SHA256_Update(&ctx, addr, 16)
    SHA256_Update(&ctx, payload, plen)
    SHA256_Final(md, &ctx)
    for k in range(tlen):
        target[k] ^= md[k]


cdef inline void _xor_sha512(const SHA512_CTX *base, const uint8_t *addr, const uint8_t *payload,
                             Py_ssize_t plen, uint8_t *target, Py_ssize_t tlen) noexcept nogil:
    cdef SHA512_CTX ctx
    cdef unsigned char md[64]
    cdef Py_ssize_t k
    memcpy(&ctx, base, sizeof(SHA512_CTX))
    SHA512_Update(&ctx, addr, 16)
    SHA512_Update(&ctx, payload, plen)
    SHA512_Final(md, &ctx)
    for k in range(tlen):
        target[k] ^= md[k]


cdef void _prefix(bytes key, int tag, SHA256_CTX *c256, SHA512_CTX *c512):
    cdef unsigned char head[17]
    cdef const unsigned char *kp = key
    head[0] = <unsigned char>tag
    memcpy(&head[1], kp, 16)
    if c256 != NULL:
        SHA256_Init(c256)
        SHA256_Update(c256, head, 17)
    if c512 != NULL:
        SHA512_Init(c512)
        SHA512_Update(c512, head, 17)


def mask_dwt(bytes key, uint64_t chunk_index, Py_ssize_t bpr, a, b, c):
    cdef const uint8_t[:, ::1] av = a
    cdef uint8_t[:, ::1] bv = b
    cdef uint8_t[:, ::1] cv = c
    cdef Py_ssize_t n = av.shape[0], i
    checks = np.empty((n, 2), dtype=np.uint8)
    cdef uint8_t[:, ::1] ck = checks
    cdef SHA256_CTX base_b
    cdef SHA512_CTX base_c
    cdef uint8_t addr[16]
    cdef uint8_t last
    cdef uint16_t crc
    _prefix(key, 1, &base_b, NULL)
    _prefix(key, 2, NULL, &base_c)
    with nogil:
        for i in range(n):
            _address(addr, chunk_index, i, bpr)
            last = bv[i, 15]
            _xor_sha256(&base_b, addr, &av[i, 0], 5, &bv[i, 0], 16)
            bv[i, 15] = (bv[i, 15] & 0xF0) | (last & 0x0F)
            _xor_sha512(&base_c, addr, &bv[i, 0], 16, &cv[i, 0], 60)
            crc = _crc_update(0xFFFF, &bv[i, 0], 16)
            crc = _crc_update(crc, &cv[i, 0], 60)
            ck[i, 0] = <uint8_t>(crc >> 8)
            ck[i, 1] = <uint8_t>(crc & 0xFF)
    return checks


def unmask_dwt(bytes key, uint64_t chunk_index, Py_ssize_t bpr, a, b, c, check):
    cdef const uint8_t[:, ::1] av = a
    cdef uint8_t[:, ::1] bv = b
    cdef uint8_t[:, ::1] cv = c
    cdef const uint8_t[:, ::1] ck = np.ascontiguousarray(check, dtype=np.uint8)
    cdef Py_ssize_t n = av.shape[0], i
    flags = np.zeros(n, dtype=bool)
    cdef uint8_t[::1] fl = flags.view(np.uint8)
    cdef SHA256_CTX base_b
    cdef SHA512_CTX base_c
    cdef uint8_t addr[16]
    cdef uint8_t last
    cdef uint16_t crc
    _prefix(key, 1, &base_b, NULL)
    _prefix(key, 2, NULL, &base_c)
    with nogil:
        for i in range(n):
            crc = _crc_update(0xFFFF, &bv[i, 0], 16)
            crc = _crc_update(crc, &cv[i, 0], 60)
            fl[i] = ck[i, 0] != (crc >> 8) or ck[i, 1] != (crc & 0xFF)
            _address(addr, chunk_index, i, bpr)
            _xor_sha512(&base_c, addr, &bv[i, 0], 16, &cv[i, 0], 60)
            last = bv[i, 15]
            _xor_sha256(&base_b, addr, &av[i, 0], 5, &bv[i, 0], 16)
            bv[i, 15] = (bv[i, 15] & 0xF0) | (last & 0x0F)
    return flags


def mask_dct(bytes key, uint64_t chunk_index, Py_ssize_t bpr, priv, public, bint masked):
    cdef const uint8_t[:, ::1] pv = priv
    cdef uint8_t[:, ::1] ub = public
    cdef Py_ssize_t n = pv.shape[0], pw = pv.shape[1], i
    checks = np.empty((n, 2), dtype=np.uint8)
    cdef uint8_t[:, ::1] ck = checks
    cdef SHA512_CTX base
    cdef uint8_t addr[16]
    cdef uint16_t crc
    _prefix(key, 3, NULL, &base)
    with nogil:
        for i in range(n):
            if masked:
                _address(addr, chunk_index, i, bpr)
                _xor_sha512(&base, addr, &pv[i, 0], pw, &ub[i, 0], 64)
            crc = _crc_update(0xFFFF, &ub[i, 0], 64)
            ck[i, 0] = <uint8_t>(crc >> 8)
            ck[i, 1] = <uint8_t>(crc & 0xFF)
    return checks


def unmask_dct(bytes key, uint64_t chunk_index, Py_ssize_t bpr, priv, public, bint masked, check):
    cdef const uint8_t[:, ::1] pv = priv
    cdef uint8_t[:, ::1] ub = public
    cdef const uint8_t[:, ::1] ck = np.ascontiguousarray(check, dtype=np.uint8)
    cdef Py_ssize_t n = pv.shape[0], pw = pv.shape[1], i
    flags = np.zeros(n, dtype=bool)
    cdef uint8_t[::1] fl = flags.view(np.uint8)
    cdef SHA512_CTX base
    cdef uint8_t addr[16]
    cdef uint16_t crc
    _prefix(key, 3, NULL, &base)
    with nogil:
        for i in range(n):
            crc = _crc_update(0xFFFF, &ub[i, 0], 64)
            fl[i] = ck[i, 0] != (crc >> 8) or ck[i, 1] != (crc & 0xFF)
            if masked:
                _address(addr, chunk_index, i, bpr)
                _xor_sha512(&base, addr, &pv[i, 0], pw, &ub[i, 0], 64)
    return flags
