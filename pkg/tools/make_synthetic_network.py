"""Regenerate the bundled synthetic city network (deterministic).

A 40 x 30 street grid with jittered intersection coordinates, two directed
segments per adjacent pair, lengths equal to the jittered euclidean distance
and speed limits drawn from a small urban set. Writing is ordered, so the
output file is byte-stable for a fixed seed.

Usage: python tools/make_synthetic_network.py [output-path]
"""

import math
import sys

import numpy as np

COLS = 40
ROWS = 30
SPACING = 100.0
JITTER = 12.0
SPEEDS = [40.0, 50.0, 60.0]
SEED = 20240811


def main(path):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(SEED)))
    coords = {}
    for r in range(ROWS):
        for c in range(COLS):
            vid = r * COLS + c
            x = c * SPACING + float(rng.uniform(-JITTER, JITTER))
            y = r * SPACING + float(rng.uniform(-JITTER, JITTER))
            coords[vid] = (round(x, 2), round(y, 2))
    lines = [f"# synthetic city grid {COLS}x{ROWS}, seed {SEED}"]
    for vid in sorted(coords):
        x, y = coords[vid]
        lines.append(f"N {vid} {x} {y}")
    sid = 0
    for r in range(ROWS):
        for c in range(COLS):
            a = r * COLS + c
            for b in ((r, c + 1), (r + 1, c)):
                if b[0] >= ROWS or b[1] >= COLS:
                    continue
                bid = b[0] * COLS + b[1]
                ax, ay = coords[a]
                bx, by = coords[bid]
                length = round(math.hypot(bx - ax, by - ay), 2)
                speed = SPEEDS[int(rng.integers(len(SPEEDS)))]
                lines.append(f"E {sid} {a} {bid} {length} {speed}")
                sid += 1
                lines.append(f"E {sid} {bid} {a} {length} {speed}")
                sid += 1
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{len(coords)} vertices, {sid} segments -> {path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/trajclust/data/synthetic_city.net")
