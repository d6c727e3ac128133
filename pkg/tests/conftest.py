from __future__ import annotations

import random
from pathlib import Path

import numpy as np
import pytest

from langnav.world import GridWorld, ObjectInstance, load_world

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def three_rooms() -> GridWorld:
    return load_world(FIXTURES / "three_rooms.json")


def open_world(width: int, height: int, objects=(), cell_size: float = 0.25, walls=()) -> GridWorld:
    """Bordered single-room world; ``walls`` adds interior wall cells."""
    grid = np.zeros((height, width), dtype=bool)
    grid[0, :] = grid[-1, :] = True
    grid[:, 0] = grid[:, -1] = True
    for x, y in walls:
        grid[y, x] = True
    rooms = np.where(grid, -1, 0).astype(np.int16)
    return GridWorld("open", grid, rooms, {"r": "office"}, ("r",), tuple(objects), cell_size)


def random_world(rng: random.Random, width: int = 16, height: int = 12, density: float = 0.2,
                 n_objects: int = 4) -> GridWorld:
    grid = np.array([[rng.random() < density for _ in range(width)] for _ in range(height)], dtype=bool)
    free = [(x, y) for y in range(height) for x in range(width) if not grid[y, x]]
    if not free:
        grid[0, 0] = False
        free = [(0, 0)]
    rng.shuffle(free)
    objs = [ObjectInstance(f"o{i}", rng.choice(["mug", "laptop", "desk", "bed"]), free[i])
            for i in range(min(n_objects, len(free)))]
    rooms = np.where(grid, -1, 0).astype(np.int16)
    return GridWorld(f"rand-{rng.random():.6f}", grid, rooms, {"r": "office"}, ("r",), tuple(objs))
