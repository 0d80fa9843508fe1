"""Writes a synthetic complete-case CSV with a skew-normal covariate x and
y = beta0 + beta1 x + N(0, sigma^2)."""

import argparse
import csv
import math
import random


def skew_normal(rng, location, scale, shape):
    delta = shape / math.sqrt(1.0 + shape * shape)
    u0 = rng.gauss(0.0, 1.0)
    v = rng.gauss(0.0, 1.0)
    u1 = delta * abs(u0) + math.sqrt(1.0 - delta * delta) * v
    return location + scale * u1


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out")
    parser.add_argument("--rows", type=int, default=1956)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--location", type=float, default=11.3)
    parser.add_argument("--scale", type=float, default=1.4)
    parser.add_argument("--shape", type=float, default=-3.0)
    parser.add_argument("--beta0", type=float, default=69.06)
    parser.add_argument("--beta1", type=float, default=3.14)
    parser.add_argument("--sigma", type=float, default=13.14)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for _ in range(args.rows):
            x = skew_normal(rng, args.location, args.scale, args.shape)
            y = args.beta0 + args.beta1 * x + rng.gauss(0.0, args.sigma)
            writer.writerow([f"{x:.6f}", f"{y:.6f}"])


if __name__ == "__main__":
    main()
