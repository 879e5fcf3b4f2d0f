#!/usr/bin/env python3
"""Writes sample_trace.log: a synthetic candump capture of periodic ECU traffic.

Usage: python3 gen_sample_trace.py [out_path]
"""
import random
import sys

BASE_S = 1596032681
SPAN_S = 6.0

# (aid, extended, period_ms, dlc)
MESSAGES = [
    (0x0C4, False, 10, 8),
    (0x130, False, 20, 8),
    (0x1A0, False, 20, 6),
    (0x260, False, 50, 4),
    (0x39D, False, 40, 8),
    (0x4F1, False, 50, 2),
    (0x18FEF100, True, 50, 8),
    (0x0CF00400, True, 20, 8),
]


def payload(rng, aid, counter, dlc):
    body = [counter & 0xFF, (aid >> 3) & 0xFF] + [rng.randrange(256) for _ in range(6)]
    return bytes(body[:dlc])


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "sample_trace.log"
    rng = random.Random(20200729)
    records = []
    for aid, ext, period, dlc in MESSAGES:
        phase = rng.randrange(period * 1000)
        t, counter = phase, 0
        while t < SPAN_S * 1e6:
            jitter = rng.randrange(-300, 301)
            records.append((max(0, t + jitter), aid, ext, payload(rng, aid, counter, dlc)))
            t += period * 1000
            counter += 1
    records.sort(key=lambda r: r[0])
    with open(out, "w") as f:
        f.write("# synthetic powertrain/body traffic, %d frames, %d ids\n" % (len(records), len(MESSAGES)))
        for us, aid, ext, data in records:
            ident = "%08X" % aid if ext else "%03X" % aid
            f.write("(%d.%06d) can0 %s#%s\n" % (BASE_S + us // 1_000_000, us % 1_000_000, ident, data.hex().upper()))


if __name__ == "__main__":
    main()
