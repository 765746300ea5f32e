#!/usr/bin/env python3
"""Writes a small synthetic event file in the #snnevt v1 format.

Each class is a pair of frequency sweeps across the 700 raw channels with
class-specific start channel, slope and onset; samples of one class differ by
jitter, duration and background noise. Only the Python standard library is
used so the fixture can be regenerated anywhere.
"""
import argparse
import random


def sample_events(rng, label, classes, rate):
    events = []
    onset = 0.05 + 0.02 * (label % 5) + rng.uniform(0.0, 0.02)
    duration = rng.uniform(0.45, 0.75)
    start = 40 + (600 * label) // max(classes - 1, 1)
    slope = (label % 3 - 1) * 250.0  # channels per second
    for track, offset in enumerate((0, 90)):
        t = onset + 0.03 * track
        while t < onset + duration:
            centre = start + offset + slope * (t - onset)
            for _ in range(rng.randint(1, 3)):
                ch = int(round(centre + rng.gauss(0.0, 6.0)))
                if 0 <= ch < 700:
                    events.append((ch, t))
            t += rng.expovariate(rate)
    for _ in range(rng.randint(80, 160)):
        events.append((rng.randrange(700), rng.uniform(0.0, 1.0)))
    events.sort(key=lambda e: e[1])
    return events


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=16)
    ap.add_argument("--used-classes", type=int, default=8)
    ap.add_argument("--classes", type=int, default=20)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--rate", type=float, default=1500.0, help="sweep events per second per track")
    ap.add_argument("out")
    args = ap.parse_args()
    rng = random.Random(args.seed)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(f"#snnevt v1 raw_channels=700 classes={args.classes}\n")
        for sid in range(args.samples):
            label = sid % args.used_classes
            for ch, t in sample_events(rng, label, args.used_classes, args.rate):
                f.write(f"{sid},{label},{ch},{t:.4f}\n")


if __name__ == "__main__":
    main()
