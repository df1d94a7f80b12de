"""Regenerate data/europe_500.csv.

Targets are drawn uniformly in longitude/latitude inside a coarse outline
of Europe (mainland, Great Britain, Ireland) by rejection sampling with a
fixed seed. Weights are left to the loader, which applies cos(lat).
"""

import argparse
import csv

import numpy as np
from shapely.geometry import MultiPolygon, Point, Polygon

MAINLAND = [
    (-9.5, 37.0), (-8.8, 41.0), (-9.3, 43.0), (-8.2, 43.6), (-1.8, 43.4), (-1.2, 45.5),
    (-2.2, 47.2), (-4.7, 48.4), (-1.9, 48.7), (0.0, 49.5), (1.5, 50.2), (1.6, 51.0),
    (3.5, 51.4), (4.5, 52.5), (7.0, 53.5), (8.5, 53.5), (8.6, 55.3), (8.2, 56.7),
    (10.5, 57.6), (10.0, 55.0), (11.0, 54.0), (14.2, 53.9), (19.5, 54.4), (21.0, 56.0),
    (21.5, 57.5), (23.5, 59.2), (28.0, 59.5), (30.0, 60.0), (26.0, 60.4), (22.9, 59.9),
    (21.4, 61.0), (21.5, 63.0), (25.0, 65.5), (21.5, 64.5), (17.5, 62.5), (17.2, 61.0),
    (18.5, 59.5), (16.5, 57.0), (14.3, 55.5), (12.5, 56.2), (11.5, 58.5), (10.5, 59.3),
    (8.0, 58.0), (5.5, 58.5), (5.0, 61.0), (5.0, 62.0), (10.0, 63.5), (12.0, 66.0),
    (15.0, 68.5), (20.0, 70.0), (25.0, 71.0), (28.0, 71.0), (33.0, 69.5), (41.0, 67.5),
    (40.0, 66.0), (45.0, 67.0), (45.0, 46.0), (40.0, 47.0), (38.0, 47.0), (36.5, 45.3),
    (33.5, 44.4), (31.0, 46.6), (29.7, 45.2), (28.0, 43.5), (28.0, 42.0), (29.0, 41.0),
    (26.0, 40.6), (24.0, 40.8), (23.0, 39.5), (24.0, 38.0), (23.0, 36.4), (22.0, 36.5),
    (21.0, 38.5), (19.4, 40.3), (19.5, 41.8), (17.0, 43.3), (15.0, 44.5), (13.7, 45.7),
    (12.3, 45.3), (13.5, 43.6), (16.0, 41.5), (18.5, 40.2), (17.0, 39.0), (15.6, 38.0),
    (15.6, 40.0), (12.0, 41.7), (10.5, 43.0), (8.8, 44.4), (7.5, 43.8), (6.0, 43.1),
    (3.0, 43.3), (3.2, 41.9), (0.2, 38.8), (-2.0, 36.7), (-5.6, 36.0), (-8.9, 37.0),
]
GREAT_BRITAIN = [
    (-5.7, 50.0), (1.4, 51.2), (1.7, 52.7), (0.2, 53.5), (-1.5, 55.0), (-2.0, 57.0),
    (-1.8, 57.6), (-4.0, 58.6), (-5.0, 58.6), (-6.2, 56.5), (-5.0, 55.0), (-3.0, 54.0),
    (-3.0, 53.3), (-4.5, 52.8), (-4.2, 51.7),
]
IRELAND = [(-6.0, 52.0), (-6.0, 54.0), (-5.5, 55.2), (-8.5, 55.2), (-10.0, 54.0), (-10.2, 51.6), (-8.0, 51.5)]


def sample(count, seed):
    outline = MultiPolygon([Polygon(MAINLAND), Polygon(GREAT_BRITAIN), Polygon(IRELAND)])
    assert outline.is_valid
    rng = np.random.RandomState(seed)
    points = []
    while len(points) < count:
        lon = rng.uniform(-11.0, 46.0)
        lat = rng.uniform(34.0, 72.0)
        if outline.contains(Point(lon, lat)):
            points.append((round(lat, 4), round(lon, 4)))
    return points


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/europe_500.csv")
    parser.add_argument("--count", type=int, default=500)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lat_deg", "lon_deg"])
        writer.writerows(sample(args.count, args.seed))


if __name__ == "__main__":
    main()
