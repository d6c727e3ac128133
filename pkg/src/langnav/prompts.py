"""Prompt templates and the regexes that read them back.

Kept in one place so the oracle backend recognises exactly what the
reasoning and agent modules emit.
"""

from __future__ import annotations

import re

LOCATION_LINE = "location #{index}, located near {room}, where {{{objects}}} are also found."
LOCATION_LINE_EMPTY = "location #{index}, located near {room}, where nothing is yet found."
FRONTIER_QUERY = ("pick one single location where {goal} is most likely to occur "
                  "and give a final answer with one single location index.")
ANSWER_FORMAT = 'Finish with: "Conclusion, location #<i> with highest likelihood <p>%."'
CONCLUSION = "Conclusion, location #{index} with highest likelihood {percent}%."

IDENTIFY = ("Scene: {scene}\nTarget: {target}\n"
            "Does the scene contain the target object as described? Answer yes or no.")

QUERY_SENTINEL = "pick one single location where"
IDENTIFY_SENTINEL = "Does the scene contain the target object as described?"

LOCATION_RE = re.compile(
    r"location #(\d+), located near (.+?), where (?:\{(.*?)\} are also found|nothing is yet found)\.")
GOAL_RE = re.compile(r"pick one single location where (.+?) is most likely to occur")
IDENTIFY_RE = re.compile(r"Scene: (.*)\nTarget: (.*)\n" + re.escape(IDENTIFY_SENTINEL))


def location_line(index: int, room: str, objects) -> str:
    if objects:
        return LOCATION_LINE.format(index=index, room=room, objects=", ".join(objects))
    return LOCATION_LINE_EMPTY.format(index=index, room=room)


def conclusion(index: int, percent: int) -> str:
    return CONCLUSION.format(index=index, percent=percent)
