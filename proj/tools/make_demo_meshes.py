#!/usr/bin/env python3
"""Writes the demo meshes in data/.

surface.vtk  POLYDATA, 500 points on an ellipsoid (20 latitude rings x 25
             longitudes), quad polygons.
volume.vtk   UNSTRUCTURED_GRID, 5000 points in 10 shells around the same
             ellipsoid, hexahedral cells between shells.
fixed.json   half-space fixing everything with x <= -1.5.
"""

import json
import math
import pathlib

RINGS, SEGMENTS, LAYERS = 20, 25, 10
AXES = (2.0, 1.0, 0.5)


def ellipsoid(i, j, scale):
    theta = math.pi * (i + 0.5) / RINGS
    phi = 2.0 * math.pi * j / SEGMENTS
    return (
        scale * AXES[0] * math.cos(theta),
        scale * AXES[1] * math.sin(theta) * math.cos(phi),
        scale * AXES[2] * math.sin(theta) * math.sin(phi),
    )


def fmt(p):
    return " ".join(repr(c) for c in p)


def surface():
    pts = [ellipsoid(i, j, 1.0) for i in range(RINGS) for j in range(SEGMENTS)]
    quads = []
    for i in range(RINGS - 1):
        for j in range(SEGMENTS):
            a = i * SEGMENTS + j
            b = i * SEGMENTS + (j + 1) % SEGMENTS
            quads.append((a, b, b + SEGMENTS, a + SEGMENTS))
    lines = ["# vtk DataFile Version 3.0", "surface", "ASCII",
             "DATASET POLYDATA", f"POINTS {len(pts)} double"]
    lines += [fmt(p) for p in pts]
    lines.append(f"POLYGONS {len(quads)} {5 * len(quads)}")
    lines += ["4 " + " ".join(map(str, q)) for q in quads]
    return "\n".join(lines) + "\n"


def volume():
    per_layer = RINGS * SEGMENTS
    pts = []
    for k in range(LAYERS):
        scale = 1.05 + 2.0 * k / (LAYERS - 1)
        pts += [ellipsoid(i, j, scale) for i in range(RINGS) for j in range(SEGMENTS)]
    hexes = []
    for k in range(LAYERS - 1):
        for i in range(RINGS - 1):
            for j in range(SEGMENTS):
                a = k * per_layer + i * SEGMENTS + j
                b = k * per_layer + i * SEGMENTS + (j + 1) % SEGMENTS
                c, d = b + SEGMENTS, a + SEGMENTS
                hexes.append((a, b, c, d, a + per_layer, b + per_layer,
                              c + per_layer, d + per_layer))
    lines = ["# vtk DataFile Version 3.0", "volume", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {len(pts)} double"]
    lines += [fmt(p) for p in pts]
    lines.append(f"CELLS {len(hexes)} {9 * len(hexes)}")
    lines += ["8 " + " ".join(map(str, h)) for h in hexes]
    lines.append(f"CELL_TYPES {len(hexes)}")
    lines += ["12"] * len(hexes)
    return "\n".join(lines) + "\n"


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data"
    out.mkdir(exist_ok=True)
    (out / "surface.vtk").write_text(surface())
    (out / "volume.vtk").write_text(volume())
    fixed = [{"type": "halfspace", "point": [-1.5, 0.0, 0.0],
              "normal": [1.0, 0.0, 0.0]}]
    (out / "fixed.json").write_text(json.dumps(fixed, indent=2) + "\n")


if __name__ == "__main__":
    main()
