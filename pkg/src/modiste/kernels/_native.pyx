# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled dilation kernel: bit-packed sliding OR with shift doubling.

For a 0/1 plane the sliding window maximum is a sliding OR, and the window
is separable, so each axis needs a running OR of length 2*radius+1. Rows
are packed 64 pixels to a word, a running OR of length L doubles out of
O(log L) shift-OR passes (`t |= t >> k` in pixel space), and the vertical
pass ORs whole packed rows, so every pass touches 1/8 of the bytes the
unpacked plane would. Packing and unpacking move 8 pixels per step with
multiply-gather/spread tricks.

The plane is padded left and top by the radius (rounded up to a whole word
horizontally) so windows clipped at the leading edges read explicit zeros;
trailing edges read past the packed data, which the shift loops treat as
zero. Byte order is assumed little-endian; importing this module on a
big-endian host fails, which makes the package fall back to the numpy
kernel.
"""

import sys

import numpy as np

from libc.string cimport memcpy, memset

if sys.byteorder != "little":
    raise ImportError("the compiled dilation kernel assumes a little-endian host")

ctypedef unsigned long long u64

# Multiply-gather: collects the low bit of each of 8 bytes into 8 bits.
cdef u64 GATHER = <u64>0x0102040810204080
# Multiply-spread: byte k of (b * ONES) & SELECT keeps bit k of b.
cdef u64 ONES = <u64>0x0101010101010101
cdef u64 SELECT = <u64>0x8040201008040201
cdef u64 LOW7 = <u64>0x7F7F7F7F7F7F7F7F
cdef u64 TOP = <u64>0x8080808080808080


cdef void _pack_rows(const unsigned char[:, ::1] src, u64[:, ::1] dst,
                     int height, int width, int row_offset, int word_offset) nogil:
    """Pack 0/1 bytes into words: pixel j -> bit j&63 of word j>>6, LSB first."""
    cdef int y, i, b, px, nbytes
    cdef u64 chunk, word
    cdef const unsigned char* row
    cdef int words = (width + 63) >> 6
    for y in range(height):
        row = &src[y, 0]
        for i in range(words):
            word = 0
            for b in range(8):
                px = (i << 6) + (b << 3)
                if px >= width:
                    break
                nbytes = width - px
                chunk = 0
                memcpy(&chunk, row + px, 8 if nbytes >= 8 else nbytes)
                word |= (((chunk & ONES) * GATHER) >> 56) << (b << 3)
            dst[row_offset + y, word_offset + i] = word


cdef void _unpack_rows(const u64[:, ::1] src, unsigned char[:, ::1] dst,
                       int height, int width) nogil:
    """Inverse of `_pack_rows` from offset (0, 0), emitting exact 0/1 bytes."""
    cdef int y, i, b, px, nbytes
    cdef u64 word, block
    cdef unsigned char* row
    cdef int words = (width + 63) >> 6
    for y in range(height):
        row = &dst[y, 0]
        for i in range(words):
            word = src[y, i]
            for b in range(8):
                px = (i << 6) + (b << 3)
                if px >= width:
                    break
                block = ((word >> (b << 3)) & <u64>0xFF) * ONES & SELECT
                block = ((block + LOW7) & TOP) >> 7
                nbytes = width - px
                memcpy(row + px, &block, 8 if nbytes >= 8 else nbytes)


cdef void _or_shifted_bits(const u64[:, ::1] src, u64[:, ::1] dst,
                           int rows, int words, int pixels) nogil:
    """dst bit p = src bit p | src bit p+pixels, per row, zeros past the end."""
    cdef int q = pixels >> 6
    cdef int rem = pixels & 63
    cdef int y, i
    cdef u64 lo, hi
    cdef const u64* s
    cdef u64* d
    for y in range(rows):
        s = &src[y, 0]
        d = &dst[y, 0]
        if rem == 0:
            for i in range(words):
                lo = s[i + q] if i + q < words else 0
                d[i] = s[i] | lo
        else:
            for i in range(words):
                lo = s[i + q] if i + q < words else 0
                hi = s[i + q + 1] if i + q + 1 < words else 0
                d[i] = s[i] | (lo >> rem) | (hi << (64 - rem))


cdef void _move_bits(const u64[:, ::1] src, u64[:, ::1] dst,
                     int rows, int words, int pixels) nogil:
    """dst bit p = src bit p+pixels (pure move with pixels in 1..63)."""
    cdef int rem = pixels
    cdef int y, i
    cdef u64 hi
    cdef const u64* s
    cdef u64* d
    for y in range(rows):
        s = &src[y, 0]
        d = &dst[y, 0]
        for i in range(words):
            hi = s[i + 1] if i + 1 < words else 0
            d[i] = (s[i] >> rem) | (hi << (64 - rem))


cdef void _or_shifted_rows(const u64[:, ::1] src, u64[:, ::1] dst,
                           int rows, int words, int k) nogil:
    """dst row y = src row y | src row y+k, zero rows past the end."""
    cdef int y, i
    for y in range(rows):
        if y + k < rows:
            for i in range(words):
                dst[y, i] = src[y, i] | src[y + k, i]
        else:
            memcpy(&dst[y, 0], &src[y, 0], words * sizeof(u64))


def dilate_chebyshev(bits, int radius):
    """Sliding-window maximum of a boolean plane, square window side 2*radius+1."""
    if radius == 0:
        return bits.copy()
    cdef int height = bits.shape[0]
    cdef int width = bits.shape[1]
    if height == 0 or width == 0:
        return bits.copy()
    src = np.ascontiguousarray(bits).view(np.uint8)

    cdef int window = 2 * radius + 1
    cdef int pad_words = (radius + 63) >> 6
    cdef int pad_px = pad_words << 6
    cdef int words = pad_words + ((width + 63) >> 6)
    cdef int rows = height + radius

    plane_a = np.zeros((rows, words), dtype=np.uint64)
    plane_b = np.empty((rows, words), dtype=np.uint64)
    _pack_rows(src, plane_a, height, width, radius, pad_words)

    # Horizontal running OR of the window length, grown by doubling, then a
    # sub-word move realigns position pad_px + j - radius onto bit j.
    cdef int done = 1
    cdef int step
    cur, nxt = plane_a, plane_b
    while done < window:
        step = min(done, window - done)
        _or_shifted_bits(cur, nxt, rows, words, step)
        cur, nxt = nxt, cur
        done += step
    if pad_px - radius:
        _move_bits(cur, nxt, rows, words, pad_px - radius)
        cur, nxt = nxt, cur

    # Vertical pass: same doubling over whole packed rows. The top padding
    # makes output row y the window OR of input rows y-radius..y+radius.
    done = 1
    while done < window:
        step = min(done, window - done)
        _or_shifted_rows(cur, nxt, rows, words, step)
        cur, nxt = nxt, cur
        done += step

    out = np.empty((height, width), dtype=np.uint8)
    _unpack_rows(cur, out, height, width)
    return out.view(bool)
