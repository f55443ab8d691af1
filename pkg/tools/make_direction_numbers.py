"""Regenerate ``src/basketqmc/data/sobol_directions.txt``.

The first ten rows are the classic Bratley-Fox / Glasserman table. Further
rows come from the Joe-Kuo ``new-joe-kuo-6.21201`` set (read from the copy
bundled with SciPy), skipping polynomials already used above.

Usage: python tools/make_direction_numbers.py [DIMENSIONS]
"""

import os
import sys

import numpy as np
import scipy.stats

CLASSIC = [
    (0b1, []),
    (0b11, [1]),
    (0b111, [1, 1]),
    (0b1011, [1, 3, 7]),
    (0b1101, [1, 1, 5]),
    (0b10011, [1, 3, 1, 1]),
    (0b11001, [1, 1, 3, 7]),
    (0b100101, [1, 3, 3, 9, 9]),
    (0b111011, [1, 3, 7, 13, 3]),
    (0b101111, [1, 1, 5, 11, 27]),
]


def main(count=64):
    path = os.path.join(os.path.dirname(scipy.stats.__file__), "_sobol_direction_numbers.npz")
    data = np.load(path)
    rows = [(p, m) for p, m in CLASSIC]
    used = {p for p, _ in CLASSIC}
    for poly, vinit in zip(data["poly"], data["vinit"]):
        if len(rows) >= count:
            break
        poly = int(poly)
        if poly in used:
            continue
        q = poly.bit_length() - 1
        rows.append((poly, [int(v) for v in vinit[:q]]))
        used.add(poly)

    out = os.path.join(os.path.dirname(__file__), "..", "src", "basketqmc", "data", "sobol_directions.txt")
    with open(out, "w") as fh:
        fh.write("# sobol direction numbers, format version 1\n")
        fh.write("# columns: d q P M_1 ... M_q\n")
        fh.write("# P lists the polynomial coefficients from x^q down to x^0 as a bit string\n")
        for d, (poly, m) in enumerate(rows, start=1):
            q = poly.bit_length() - 1
            fh.write(" ".join([str(d), str(q), f"{poly:0{q + 1}b}", *map(str, m)]) + "\n")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 64)
