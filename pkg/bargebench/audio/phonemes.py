"""The committed toy phoneme inventory and its phonemic orthography.

Each keyword grapheme is one inventory symbol, so text maps to phoneme ids
without a G2P model.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import List, Sequence, Tuple

from ..errors import ConfigError

INVENTORY_SIZE = 20


@dataclass(frozen=True)
class Phoneme:
    id: int
    symbol: str
    f1_hz: float
    f2_hz: float


@lru_cache(maxsize=1)
def load_inventory() -> Tuple[Phoneme, ...]:
    text = resources.files("bargebench.audio").joinpath("data/phonemes.tsv").read_text(encoding="utf-8")
    rows = csv.DictReader(text.splitlines(), delimiter="\t")
    inventory = tuple(
        Phoneme(int(r["id"]), r["symbol"], float(r["f1_hz"]), float(r["f2_hz"])) for r in rows
    )
    if len(inventory) != INVENTORY_SIZE or [p.id for p in inventory] != list(range(INVENTORY_SIZE)):
        raise ConfigError("phonemes.tsv", f"expected ids 0..{INVENTORY_SIZE - 1} in order")
    return inventory


def check_ids(phoneme_ids: Sequence[int], name: str = "phoneme_ids") -> List[int]:
    ids = [int(i) for i in phoneme_ids]
    for i in ids:
        if not 0 <= i < INVENTORY_SIZE:
            raise ConfigError(name, f"id {i} outside inventory [0, {INVENTORY_SIZE})")
    return ids


def text_to_phonemes(text: str) -> List[int]:
    lookup = {p.symbol: p.id for p in load_inventory()}
    ids = []
    for ch in text.lower():
        if ch not in lookup:
            raise ConfigError("keyword", f"grapheme {ch!r} in {text!r} is not in the inventory")
        ids.append(lookup[ch])
    return ids


def phonemes_to_text(phoneme_ids: Sequence[int]) -> str:
    inventory = load_inventory()
    return "".join(inventory[i].symbol for i in check_ids(phoneme_ids))
