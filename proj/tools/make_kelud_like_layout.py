"""Generate the bundled 80-site clustered survey layout (data/kelud_like_sites.csv).

Five clusters of unequal size inside a 50 km x 50 km frame, plus a few
scattered sites, resembling a post-eruption field survey along access roads.
"""
import numpy as np

rng = np.random.default_rng(20140213)
centres = [(18.0, 22.0), (31.0, 27.0), (24.0, 38.0), (38.0, 12.0), (10.0, 40.0)]
sizes = [26, 18, 14, 10, 6]
spreads = [2.6, 2.2, 2.0, 1.8, 1.6]

rows = []
for (cx, cy), size, spread in zip(centres, sizes, spreads):
    pts = rng.normal(0.0, spread, size=(size, 2)) + (cx, cy)
    rows.extend(pts.tolist())
rows.extend(rng.uniform(5.0, 45.0, size=(80 - len(rows), 2)).tolist())
rows = np.clip(np.array(rows), 0.0, 50.0)

with open("data/kelud_like_sites.csv", "w") as fh:
    fh.write("x_km,y_km\n")
    for x, y in rows:
        fh.write(f"{x:.3f},{y:.3f}\n")
