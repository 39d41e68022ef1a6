#!/usr/bin/env python3
"""Regenerate scripts/fox.gesture from the keyboard layout.

The script types "fox" on the built-in keyboard under absolute mapping with
the default 10% margin on a 640x480 frame: the hand moves over a key, holds,
closes for five frames and opens again. "o" and "x" live on the second
letters page, so the hand first presses the page tab.
"""

import math
import pathlib
import xml.etree.ElementTree as ET

ROOT = pathlib.Path(__file__).resolve().parent.parent
KEYBOARD = ROOT / "crates/core/interfaces/keyboard.xml"
OUT = ROOT / "scripts/fox.gesture"

FRAME_W, FRAME_H = 640, 480
MARGIN = 0.1
RX, RY = 36, 48
STEP = 8.0  # hand pixels per frame while moving


def zone_centers():
    root = ET.parse(KEYBOARD).getroot()
    iw, ih = int(root.get("width")), int(root.get("height"))
    centers = {}
    for page in root.findall("page"):
        for z in page.findall("zone"):
            x, y, w, h = (int(z.get(k)) for k in ("x", "y", "w", "h"))
            centers[(page.get("id"), z.get("id"))] = (x + w / 2, y + h / 2)
    return iw, ih, centers


def to_hand(iw, ih, pos):
    ax, ay = FRAME_W * MARGIN, FRAME_H * MARGIN
    aw, ah = FRAME_W * (1 - 2 * MARGIN), FRAME_H * (1 - 2 * MARGIN)
    return (ax + pos[0] / iw * aw, ay + pos[1] / ih * ah)


def main():
    iw, ih, centers = zone_centers()
    lines = [
        "# Types \"fox\" on the built-in keyboard (absolute mapping, margin 0.1).",
        "# Generated by make_fox_gesture.py.",
        f"size {FRAME_W} {FRAME_H}",
        "fps 30",
        "background 40 70 120",
        "skin 20 0.5 0.8",
        "closed_ratio 0.45",
        "noise 2 2024",
        "distractor 520 380 100 80 140",
    ]
    lines += ["none"] * 30

    hand = to_hand(iw, ih, (320, 300))

    def emit(pos, state):
        lines.append(f"{pos[0]:.1f} {pos[1]:.1f} {RX} {RY} {state}")

    def move_to(target):
        nonlocal hand
        dist = math.dist(hand, target)
        n = max(1, math.ceil(dist / STEP))
        start = hand
        for i in range(1, n + 1):
            t = i / n
            emit((start[0] + t * (target[0] - start[0]), start[1] + t * (target[1] - start[1])), "open")
        hand = target

    def press():
        for _ in range(4):
            emit(hand, "open")
        for _ in range(5):
            emit(hand, "closed")
        for _ in range(5):
            emit(hand, "open")

    for _ in range(5):
        emit(hand, "open")
    for key in [("letters_am", "key_f"), ("letters_am", "goto_nz"), ("letters_nz", "key_o"), ("letters_nz", "key_x")]:
        move_to(to_hand(iw, ih, centers[key]))
        press()
    lines += ["none"] * 10
    OUT.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
