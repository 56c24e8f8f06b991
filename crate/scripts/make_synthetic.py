#!/usr/bin/env python3
"""Generate the bundled synthetic city fixture.

Writes pois.csv, visits.csv and manifest.json into data/synthetic/. The
manifest counts are computed here with an independent implementation of the
trajectory rules (split on gaps > 8h, keep first occurrence, drop < 3 POIs),
so the Rust ingestion can be checked against them.
"""
import csv
import json
import math
import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "synthetic")
SEED = 20240611
GAP = 8 * 3600

CATEGORIES = ["museum", "park", "castle", "church", "market", "viewpoint"]
TOURS = [
    [0, 3, 7, 12, 5],
    [0, 4, 9, 5],
    [2, 6, 11, 14, 18],
    [2, 8, 13, 18],
    [1, 10, 15, 19, 21, 16],
    [3, 12, 17, 20, 22],
    [5, 9, 14, 23],
    [7, 1, 6, 10, 11],
]


def make_pois(rng):
    pois = []
    for i in range(24):
        ang = rng.uniform(0, 2 * math.pi)
        rad = rng.uniform(0.002, 0.03)
        lat = 55.9500 + rad * math.sin(ang)
        lon = -3.1900 + rad * 1.8 * math.cos(ang)
        pois.append((i, round(lat, 6), round(lon, 6), CATEGORIES[i % len(CATEGORIES)]))
    return pois


def perturb(tour, rng, n):
    seq = list(tour)
    r = rng.random()
    if r < 0.15 and len(seq) > 3:
        del seq[rng.randrange(1, len(seq) - 1)]
    elif r < 0.30:
        seq.insert(rng.randrange(1, len(seq)), rng.randrange(n))
    if rng.random() < 0.10:
        # revisit: creates a loop the preprocessing must remove
        seq.insert(rng.randrange(1, len(seq)), seq[0])
    return seq


def make_visits(rng, n):
    visits = []
    day = 24 * 3600
    t0 = 1_500_000_000
    for user in range(180):
        t = t0 + rng.randrange(0, 30) * day + rng.randrange(8, 11) * 3600
        for _ in range(rng.randrange(1, 4)):
            kind = rng.random()
            if kind < 0.75:
                seq = perturb(rng.choice(TOURS), rng, n)
            elif kind < 0.90:
                seq = [rng.randrange(n) for _ in range(rng.randrange(3, 7))]
            else:
                seq = [rng.randrange(n) for _ in range(2)]
            for j, p in enumerate(seq):
                visits.append((user, p, t))
                step = rng.randrange(20, 120) * 60
                if j == 1 and rng.random() < 0.05:
                    step = GAP  # exactly 8h: same trajectory
                if j == 1 and rng.random() < 0.05:
                    step = GAP + 60  # just over: split
                t += step
            t += rng.randrange(2, 6) * day
    return visits


def routes_from(visits):
    by_user = {}
    for u, p, ts in visits:
        by_user.setdefault(u, []).append((ts, p))
    routes = []
    for u in sorted(by_user):
        rows = sorted(by_user[u], key=lambda r: r[0])
        trajs, cur, last = [], [], None
        for ts, p in rows:
            if last is not None and ts - last > GAP:
                trajs.append(cur)
                cur = []
            cur.append(p)
            last = ts
        if cur:
            trajs.append(cur)
        for tr in trajs:
            seen, out = set(), []
            for p in tr:
                if p not in seen:
                    seen.add(p)
                    out.append(p)
            if len(out) >= 3:
                routes.append(out)
    return routes


def main():
    rng = random.Random(SEED)
    pois = make_pois(rng)
    visits = make_visits(rng, len(pois))
    shuffled = list(visits)
    rng.shuffle(shuffled)
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, "pois.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["poi_id", "lat", "lon", "category"])
        w.writerows(pois)
    with open(os.path.join(OUT, "visits.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["user_id", "poi_id", "ts"])
        w.writerows(shuffled)
    routes = routes_from(visits)
    pairs = {(r[0], r[-1]) for r in routes}
    manifest = {
        "name": "synthetic-city",
        "seed": SEED,
        "n_pois": len(pois),
        "n_visits": len(visits),
        "n_routes": len(routes),
        "n_unique_pairs": len(pairs),
        "max_route_len": max(len(r) for r in routes),
        "routes": routes,
    }
    with open(os.path.join(OUT, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)
    print({k: v for k, v in manifest.items() if k != "routes"})


if __name__ == "__main__":
    main()
