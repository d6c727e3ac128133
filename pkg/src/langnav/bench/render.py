"""Top-down trajectory images as binary PPM (P6)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from ..episode import EpisodeResult, Episode
from ..errors import ContractViolation
from ..mapping import FREE, OBSTACLE, SemanticMap
from ..world import Action, AgentPose, GridWorld, step

SCALE = 8  # pixels per cell

WALL = (40, 40, 40)
EXPLORED = (235, 235, 225)
UNSEEN = (150, 150, 150)
START = (0, 0, 255)
END = (255, 255, 255)
GOAL = (0, 200, 0)
REJECTED = (220, 0, 0)


def gradient(n: int) -> list[tuple[int, int, int]]:
    """``n`` colours from blue (first) to white (last)."""
    if n < 1:
        return []
    if n == 1:
        return [START]
    out = []
    for i in range(n):
        f = i / (n - 1)
        out.append(tuple(int(round(s + (e - s) * f)) for s, e in zip(START, END)))
    return out


def replay(world: GridWorld, start: AgentPose, actions: Sequence[Action]) -> list[AgentPose]:
    """Poses before and after every action (``len(actions) + 1`` entries)."""
    poses = [start]
    for a in actions:
        if a is Action.STOP:
            poses.append(poses[-1])
            continue
        poses.append(step(world, poses[-1], a)[0])
    return poses


def _fill(img: np.ndarray, cell: tuple[int, int], color, inset: int = 0) -> None:
    x, y = cell
    img[y * SCALE + inset:(y + 1) * SCALE - inset, x * SCALE + inset:(x + 1) * SCALE - inset] = color


def _outline(img: np.ndarray, cell: tuple[int, int], color) -> None:
    x, y = cell
    y0, y1, x0, x1 = y * SCALE, (y + 1) * SCALE - 1, x * SCALE, (x + 1) * SCALE - 1
    img[y0, x0:x1 + 1] = color
    img[y1, x0:x1 + 1] = color
    img[y0:y1 + 1, x0] = color
    img[y0:y1 + 1, x1] = color


def render_image(world: GridWorld, episode: Episode, result: EpisodeResult,
                 map_snapshot: dict | None = None) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """RGB array plus the gradient samples used, one per trajectory pose."""
    img = np.empty((world.height * SCALE, world.width * SCALE, 3), dtype=np.uint8)
    if map_snapshot is not None:
        m = SemanticMap.from_snapshot(map_snapshot)
        if (m.width, m.height) != (world.width, world.height):
            raise ContractViolation("map snapshot does not match the world size")
        img[:] = UNSEEN  # unknown cells stay gray
        for state, color in ((FREE, EXPLORED), (OBSTACLE, WALL)):
            ys, xs = np.nonzero(m.occ == state)
            for x, y in zip(xs, ys):
                _fill(img, (int(x), int(y)), color)
    else:
        img[:] = EXPLORED
        ys, xs = np.nonzero(world.walls)
        for x, y in zip(xs, ys):
            _fill(img, (int(x), int(y)), WALL)
    poses = replay(world, episode.start, result.actions)
    colors = gradient(len(poses))
    for pose, color in zip(poses, colors):
        _fill(img, pose.cell, color, inset=2)
    _outline(img, world.object(episode.goal_instance_id).position, GOAL)
    for iid in result.rejected_ids:
        try:
            _outline(img, world.object(iid).position, REJECTED)
        except KeyError:  # detector false positives have no ground-truth object
            continue
    return img, colors


def write_ppm(img: np.ndarray, out_path: str | Path) -> Path:
    path = Path(out_path)
    h, w, _ = img.shape
    with path.open("wb") as fh:  # OSError propagates for unwritable paths
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())
    return path


def read_ppm(path: str | Path) -> np.ndarray:
    """Reads files in the layout ``write_ppm`` produces (one header field per line)."""
    magic, dims, maxval, pixels = Path(path).read_bytes().split(b"\n", 3)
    if magic != b"P6" or maxval != b"255":
        raise ValueError("not an 8-bit P6 image")
    w, h = (int(v) for v in dims.split())
    return np.frombuffer(pixels, dtype=np.uint8, count=w * h * 3).reshape(h, w, 3)


def render_trajectory(world: GridWorld, map_snapshot: dict | None, result: EpisodeResult, out_path: str | Path,
                      episode: Episode) -> Path:
    img, _ = render_image(world, episode, result, map_snapshot)
    return write_ppm(img, out_path)
