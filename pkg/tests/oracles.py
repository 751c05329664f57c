"""Independent reference computations the tests check the library against.

Nothing here imports igtlink.
"""

from __future__ import annotations

import math
import re

POLY = 0x42F0E1EBA9EA3693


def crc64_bitserial(data: bytes) -> int:
    """Long division over GF(2), one message bit at a time, MSB first.

    The message is augmented with 64 zero bits, so this is the textbook
    remainder of M(x) * x^64 mod G(x) with G(x) = x^64 + POLY.
    """
    generator = (1 << 64) | POLY
    register = 0
    bits = [(byte >> (7 - i)) & 1 for byte in data for i in range(8)] + [0] * 64
    for bit in bits:
        register = (register << 1) | bit
        if register >> 64:
            register ^= generator
    return register


def qmul(a, b):
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return (
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    )


def rotate_by_sandwich(q, v):
    """q v q* for a unit quaternion q = (x, y, z, w) and 3-vector v."""
    n = math.sqrt(sum(c * c for c in q))
    q = tuple(c / n for c in q)
    conj = (-q[0], -q[1], -q[2], q[3])
    x, y, z, _ = qmul(qmul(q, (v[0], v[1], v[2], 0.0)), conj)
    return (x, y, z)


def sandwich_matrix(q):
    """Rows i, columns j: column j is the image of basis vector e_j."""
    cols = [rotate_by_sandwich(q, e) for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))]
    return [[cols[j][i] for j in range(3)] for i in range(3)]


def two_pass_stats(samples):
    n = len(samples)
    mean = sum(samples) / n
    if n == 1:
        return min(samples), max(samples), mean, 0.0
    var = sum((s - mean) ** 2 for s in samples) / (n - 1)
    return min(samples), max(samples), mean, math.sqrt(var)


_FOOTER = re.compile(r"^overall: (-?[\d.]+) ± (-?[\d.]+) ms \(n=(\d+)\)$")


def parse_table(text: str) -> dict:
    """Read back a rendered latency table into plain lists."""
    rows = {}
    footer = None
    for line in text.splitlines():
        m = _FOOTER.match(line)
        if m:
            footer = (float(m.group(1)), float(m.group(2)), int(m.group(3)))
            continue
        for label in ("Run No.", "min", "max", "mean"):
            if line.startswith(label + " ") or line == label:
                cells = line[len(label):].split()
                rows[label] = [int(c) for c in cells] if label == "Run No." else [float(c) for c in cells]
    return {"runs": rows["Run No."], "min": rows["min"], "max": rows["max"], "mean": rows["mean"], "overall": footer}
