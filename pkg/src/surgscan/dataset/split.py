"""Leakage-safe stratified train/validation splitting."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from surgscan.core import AnnotatedImage, SurgScanError
from surgscan.dataset.manifest import DatasetManifest, Split


class EmptyDataset(SurgScanError):
    """Split requested over a manifest with no entries."""


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.80
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _stratum_key(entry: AnnotatedImage) -> tuple[str, str]:
    return (entry.instrument.value, "defective" if entry.is_defective else "clean")


def _train_quotas(sizes: dict[tuple[str, str], int], fraction: float) -> dict[tuple[str, str], int]:
    """Per-stratum train counts via largest-remainder apportionment.

    The grand total targets round-half-up(fraction * N).  Size-1 strata are
    pinned to Train before apportioning the rest; ties on equal remainders go
    to the lexically smaller stratum name.
    """
    total = sum(sizes.values())
    target = _round_half_up(fraction * total)
    quotas: dict[tuple[str, str], int] = {}
    open_strata: list[tuple[str, str]] = []
    for key in sorted(sizes):
        if sizes[key] == 1:
            quotas[key] = 1
        else:
            open_strata.append(key)
    remaining = max(0, target - sum(quotas.values()))
    shares = {key: fraction * sizes[key] for key in open_strata}
    for key in open_strata:
        quotas[key] = min(int(math.floor(shares[key])), sizes[key])
    extras = remaining - sum(quotas[key] for key in open_strata)
    ranked = sorted(open_strata, key=lambda key: (-(shares[key] - math.floor(shares[key])), key))
    while extras > 0:
        progressed = False
        for key in ranked:
            if extras == 0:
                break
            if quotas[key] < sizes[key]:
                quotas[key] += 1
                extras -= 1
                progressed = True
        if not progressed:
            break
    return quotas


def stratified_split(manifest: DatasetManifest, cfg: SplitConfig) -> DatasetManifest:
    """Assign every original to Train or Val, balanced per instrument and condition.

    Deterministic for a given seed: strata are visited in sorted name order
    and one seeded generator shuffles each stratum's sorted ids in turn.
    """
    if not manifest.entries:
        raise EmptyDataset("cannot split an empty manifest")
    augmented = [e.id for e in manifest.entries if e.is_augmented]
    if augmented:
        raise ValueError(f"split expects originals only; found augmented entries: {augmented[:3]}")

    strata: dict[tuple[str, str], list[str]] = {}
    for entry in manifest.entries:
        strata.setdefault(_stratum_key(entry), []).append(entry.id)
    quotas = _train_quotas({key: len(ids) for key, ids in strata.items()}, cfg.train_fraction)

    rng = random.Random(cfg.seed)
    assignment: dict[str, Split] = {}
    for key in sorted(strata):
        ids = sorted(strata[key])
        rng.shuffle(ids)
        take = quotas[key]
        for image_id in ids[:take]:
            assignment[image_id] = Split.TRAIN
        for image_id in ids[take:]:
            assignment[image_id] = Split.VAL

    result = DatasetManifest(
        entries=list(manifest.entries),
        class_map=dict(manifest.class_map),
        split=assignment,
    )
    result.validate(require_split=True)
    return result
