#!/usr/bin/env python3
"""Regenerate the synthetic FER2013 / FER+ fixture pair.

The pixel data is synthetic: low-intensity noise plus a bright 10x10 block
whose position encodes the intended 8-class label, so small models can fit
it. Vote rows exercise the merge rules (exclusions and the tie rule).

Usage: python3 make_fixture.py  (writes fer2013.csv and fer2013new.csv here)
"""
import os
import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
ROWS = 100
# label8 order: neutral, happiness, surprise, sadness, anger, disgust, fear, contempt
LABEL8_TO_FER = [6, 3, 5, 4, 0, 1, 2, 0]

# row -> explicit 10-column vote vector
SPECIAL = {
    13: [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],  # no votes
    27: [0, 1, 0, 0, 0, 0, 0, 0, 0, 9],  # not-a-face wins
    41: [3, 0, 0, 0, 0, 0, 0, 0, 7, 0],  # unknown wins
    55: [0, 0, 2, 1, 0, 0, 0, 0, 0, 0],  # winner below 3 votes
    62: [5, 5, 0, 0, 0, 0, 0, 0, 0, 0],  # tie -> neutral
    85: [0, 0, 0, 0, 0, 0, 0, 0, 0, 10],  # not-a-face (PublicTest)
}


def usage(i):
    if i < 80:
        return "Training"
    if i < 90:
        return "PublicTest"
    return "PrivateTest"


def main():
    rng = np.random.default_rng(2013)
    fer_lines = ["emotion,pixels,Usage"]
    plus_lines = ["usage,Image name,neutral,happiness,surprise,sadness,anger,disgust,fear,contempt,unknown,NF"]
    for i in range(ROWS):
        label = 0 if i == 62 else i % 8
        img = rng.integers(0, 80, size=(48, 48))
        r0 = 6 + (label // 4) * 22
        c0 = 2 + (label % 4) * 11
        img[r0:r0 + 10, c0:c0 + 10] = rng.integers(200, 256, size=(10, 10))
        fer_lines.append("%d,%s,%s" % (LABEL8_TO_FER[label], " ".join(str(v) for v in img.flatten()), usage(i)))
        if i in SPECIAL:
            votes = SPECIAL[i]
        else:
            votes = [0] * 10
            votes[label] = 6 + i % 3
            other = (label + 1 + i % 7) % 8
            votes[other] = int(rng.integers(0, 3))
            votes[8] = i % 2
        plus_lines.append("%s,fer%07d.png,%s" % (usage(i), i, ",".join(str(v) for v in votes)))
    with open(os.path.join(HERE, "fer2013.csv"), "w") as f:
        f.write("\n".join(fer_lines) + "\n")
    with open(os.path.join(HERE, "fer2013new.csv"), "w") as f:
        f.write("\n".join(plus_lines) + "\n")


if __name__ == "__main__":
    main()
