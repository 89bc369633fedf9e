#!/usr/bin/env python3
# Copyright 2026 The tiermem Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes tests/data/golden.svmt with a struct-based encoder independent of the C++ writer.

The frames must match golden_frames() in tests/acceptance/acceptance_main.cpp.
"""
import struct
import sys

DIM = 3


def frames():
    # (frame_index, timestamp, [(row, col, [f32 x DIM])])
    return [
        (0, 0.0, [(0, 0, [1.0, 0.0, 0.0])]),
        (1, 0.5, [(0, 0, [0.25, -0.5, 2.0]), (0, 1, [-1.0, 3.5, 0.125])]),
        (7, 1.25, [(1, 0, [0.0, 0.0, 0.0]), (1, 1, [1e-3, -7.0, 65504.0]), (2, 3, [0.1, 0.2, 0.3])]),
    ]


def encode():
    fs = frames()
    out = bytearray(b"SVMT")
    out += struct.pack("<IIQ", 1, DIM, len(fs))
    for index, ts, tokens in fs:
        out += struct.pack("<QdI", index, ts, len(tokens))
        for row, col, values in tokens:
            out += struct.pack("<HH", row, col)
            out += struct.pack("<%df" % DIM, *values)
    return bytes(out)


if __name__ == "__main__":
    path = sys.argv[1] if len(sys.argv) > 1 else "tests/data/golden.svmt"
    with open(path, "wb") as fh:
        fh.write(encode())
