"""Authored household catalog used by suite generation and the shipped data files.

Values here are fixtures chosen so that room and furniture context says
something about where each goal lives; they are not claims about real homes.
"""

from __future__ import annotations

ROOM_FURNITURE: dict[str, tuple[str, ...]] = {
    "kitchen": ("fridge", "stove", "counter", "sink", "microwave"),
    "bedroom": ("bed", "dresser", "nightstand", "wardrobe"),
    "bathroom": ("toilet", "bathtub", "towel rack", "sink"),
    "office": ("desk", "office chair", "bookshelf", "printer"),
    "living room": ("sofa", "tv stand", "coffee table", "armchair"),
    "dining room": ("dining table", "dining chair", "cabinet"),
    "hallway": ("shoe rack", "coat hanger"),
    "laundry room": ("washing machine", "dryer", "laundry basket"),
    "storage room": ("shelf", "cardboard box"),
}

# goal -> ((home room, anchors), (secondary room, anchors))
GOALS: dict[str, tuple[tuple[str, tuple[str, ...]], tuple[str, tuple[str, ...]]]] = {
    "alarm clock": (("bedroom", ("nightstand", "dresser")), ("office", ("desk",))),
    "apple": (("kitchen", ("counter", "fridge")), ("dining room", ("dining table",))),
    "baseball bat": (("storage room", ("shelf",)), ("bedroom", ("wardrobe",))),
    "basketball": (("hallway", ("shoe rack",)), ("living room", ("sofa",))),
    "bowl": (("kitchen", ("counter", "sink")), ("dining room", ("dining table", "cabinet"))),
    "garbage can": (("kitchen", ("sink",)), ("office", ("printer",))),
    "house plant": (("living room", ("coffee table", "armchair")), ("hallway", ("coat hanger",))),
    "laptop": (("office", ("desk", "office chair")), ("bedroom", ("bed",))),
    "mug": (("kitchen", ("microwave", "counter")), ("office", ("desk",))),
    "spray bottle": (("bathroom", ("bathtub", "towel rack")), ("laundry room", ("washing machine",))),
    "television": (("living room", ("tv stand", "sofa")), ("bedroom", ("dresser",))),
    "vase": (("dining room", ("dining table", "cabinet")), ("living room", ("coffee table",))),
    # long-tail goals for the Uncommon split
    "espresso machine": (("kitchen", ("counter", "microwave")), ("office", ("bookshelf",))),
    "rice cooker": (("kitchen", ("stove", "counter")), ("dining room", ("cabinet",))),
    "graphics card": (("office", ("printer", "bookshelf")), ("storage room", ("cardboard box",))),
    "electric guitar": (("living room", ("armchair", "sofa")), ("bedroom", ("bed",))),
    "gingerbread house": (("dining room", ("dining table",)), ("kitchen", ("counter",))),
    "toy airplane": (("bedroom", ("bed", "wardrobe")), ("storage room", ("shelf",))),
}

COMMON_GOALS: tuple[str, ...] = tuple(list(GOALS)[:12])
UNCOMMON_GOALS: tuple[str, ...] = tuple(list(GOALS)[12:])

ATTRIBUTE_SETS: dict[str, tuple[tuple[str, ...], ...]] = {
    "alarm clock": (("small", "metallic"), ("red",), ("wooden",)),
    "apple": (("red",), ("green",), ("small", "yellow")),
    "baseball bat": (("wooden",), ("metallic",), ("black",)),
    "basketball": (("orange",), ("small", "leather")),
    "bowl": (("ceramic",), ("blue", "glass"), ("large", "wooden")),
    "garbage can": (("metallic",), ("small", "plastic"), ("green",)),
    "house plant": (("large",), ("small", "green")),
    "laptop": (("silver",), ("black",), ("small", "white")),
    "mug": (("white", "ceramic"), ("red",), ("striped",)),
    "spray bottle": (("blue", "plastic"), ("white",)),
    "television": (("large", "black"), ("small",)),
    "vase": (("glass",), ("blue", "ceramic"), ("tall",)),
}

ATTRIBUTES: tuple[str, ...] = tuple(sorted({a for sets in ATTRIBUTE_SETS.values() for s in sets for a in s}))

# Furniture that supports things on top: relation phrases read "on a <anchor>".
SURFACES = frozenset({"counter", "dresser", "nightstand", "desk", "coffee table", "dining table",
                      "cabinet", "shelf", "bookshelf", "tv stand", "microwave", "washing machine"})

HIDING_PREPOSITION: dict[str, str] = {
    "bed": "under", "sofa": "behind", "armchair": "behind", "wardrobe": "inside",
    "cabinet": "inside", "cardboard box": "inside", "dresser": "inside", "bathtub": "behind",
    "desk": "under", "dining table": "under", "coffee table": "under", "counter": "under",
    "shelf": "behind", "fridge": "behind", "laundry basket": "inside", "shoe rack": "behind",
}


def article(noun: str) -> str:
    return "an" if noun[0] in "aeiou" else "a"


def affinity_scores() -> dict[str, dict[str, float]]:
    """Goal x context-term scores written to ``data/affinity.json``."""
    out: dict[str, dict[str, float]] = {}
    for goal, ((home, home_anchors), (second, second_anchors)) in GOALS.items():
        row: dict[str, float] = {}
        for f in ROOM_FURNITURE[second]:
            row[f] = 0.5 if f in second_anchors else 0.3
        for f in ROOM_FURNITURE[home]:
            row[f] = 0.9 if f in home_anchors else 0.6
        row[second] = 0.4
        row[home] = 0.8
        out[goal] = dict(sorted(row.items()))
    return out
