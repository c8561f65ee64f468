"""Stratified train/val splitting."""

from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surgscan.core import (
    AnnotatedImage,
    Augmented,
    DefectClass,
    InstrumentClass,
    Original,
    PixelBBox,
    Transform,
)
from surgscan.dataset import DatasetManifest, EmptyDataset, Split, SplitConfig, stratified_split


def entry(image_id: str, instrument: InstrumentClass, defective: bool) -> AnnotatedImage:
    defects = ((DefectClass.Pore, PixelBBox(0, 0, 10, 10)),) if defective else ()
    return AnnotatedImage(
        id=image_id,
        path=Path(f"/img/{image_id}.png"),
        width=64,
        height=64,
        instrument=instrument,
        defects=defects,
        provenance=Original(),
    )


def make_manifest(strata: dict[tuple[InstrumentClass, bool], int]) -> DatasetManifest:
    entries = []
    for (instrument, defective), count in strata.items():
        tag = "def" if defective else "cln"
        slug = instrument.name.lower()
        for j in range(count):
            entries.append(entry(f"{slug}-{tag}-{j:03d}", instrument, defective))
    return DatasetManifest(entries=entries)


class TestProportions:
    def test_two_strata_of_ten(self):
        m = make_manifest(
            {
                (InstrumentClass.Scalpel, True): 10,
                (InstrumentClass.Scissors, False): 10,
            }
        )
        out = stratified_split(m, SplitConfig(train_fraction=0.8, seed=0))
        for instrument in (InstrumentClass.Scalpel, InstrumentClass.Scissors):
            ids = [e.id for e in out.entries if e.instrument is instrument]
            train = [i for i in ids if out.split[i] is Split.TRAIN]
            assert len(train) == 8
            assert len(ids) - len(train) == 2

    def test_stratum_of_five(self):
        m = make_manifest({(InstrumentClass.Probe, True): 5})
        out = stratified_split(m, SplitConfig(train_fraction=0.8, seed=3))
        assert len(out.entries_for(Split.TRAIN)) == 4
        assert len(out.entries_for(Split.VAL)) == 1

    def test_singleton_stratum_goes_to_train(self):
        m = make_manifest(
            {
                (InstrumentClass.Carver, True): 1,
                (InstrumentClass.Scalpel, False): 10,
            }
        )
        out = stratified_split(m, SplitConfig(train_fraction=0.8, seed=0))
        carver = [e for e in out.entries if e.instrument is InstrumentClass.Carver]
        assert out.split[carver[0].id] is Split.TRAIN

    def test_every_entry_assigned(self):
        m = make_manifest(
            {
                (InstrumentClass.Scalpel, True): 7,
                (InstrumentClass.Scalpel, False): 3,
                (InstrumentClass.Probe, True): 2,
            }
        )
        out = stratified_split(m, SplitConfig())
        assert set(out.split) == {e.id for e in out.entries}

    def test_defective_and_clean_are_separate_strata(self):
        m = make_manifest(
            {
                (InstrumentClass.Scalpel, True): 10,
                (InstrumentClass.Scalpel, False): 10,
            }
        )
        out = stratified_split(m, SplitConfig(train_fraction=0.8, seed=1))
        for defective in (True, False):
            ids = [e.id for e in out.entries if e.is_defective is defective]
            train = [i for i in ids if out.split[i] is Split.TRAIN]
            assert len(train) == 8


class TestDeterminism:
    def test_same_seed_same_assignment(self):
        m = make_manifest(
            {
                (InstrumentClass.Scalpel, True): 13,
                (InstrumentClass.Scissors, False): 9,
            }
        )
        a = stratified_split(m, SplitConfig(seed=7))
        b = stratified_split(m, SplitConfig(seed=7))
        assert a.split == b.split

    def test_different_seed_usually_differs(self):
        m = make_manifest({(InstrumentClass.Scalpel, True): 30})
        a = stratified_split(m, SplitConfig(seed=1))
        b = stratified_split(m, SplitConfig(seed=2))
        assert a.split != b.split

    def test_entry_order_does_not_matter(self):
        m = make_manifest({(InstrumentClass.Scalpel, True): 12})
        reversed_m = DatasetManifest(entries=list(reversed(m.entries)))
        a = stratified_split(m, SplitConfig(seed=5))
        b = stratified_split(reversed_m, SplitConfig(seed=5))
        assert a.split == b.split


class TestErrors:
    def test_empty_dataset(self):
        with pytest.raises(EmptyDataset):
            stratified_split(DatasetManifest(), SplitConfig())

    def test_augmented_entries_rejected(self):
        base = entry("a", InstrumentClass.Scalpel, True)
        aug = AnnotatedImage(
            id="a__aug_rot180",
            path=Path("/img/a__aug_rot180.png"),
            width=64,
            height=64,
            instrument=InstrumentClass.Scalpel,
            defects=base.defects,
            provenance=Augmented("a", Transform.rotate_fixed(180)),
        )
        m = DatasetManifest(entries=[base, aug])
        with pytest.raises(ValueError):
            stratified_split(m, SplitConfig())

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.2, 1.5])
    def test_bad_fraction_rejected(self, fraction):
        with pytest.raises(ValueError):
            SplitConfig(train_fraction=fraction)


@settings(max_examples=60, deadline=None)
@given(
    sizes=st.lists(st.integers(min_value=1, max_value=40), min_size=1, max_size=6),
    fraction=st.floats(min_value=0.05, max_value=0.95),
    seed=st.integers(min_value=0, max_value=2**32),
)
def test_stratum_proportion_property(sizes, fraction, seed):
    instruments = list(InstrumentClass)
    m = make_manifest({(instruments[i], True): n for i, n in enumerate(sizes)})
    out = stratified_split(m, SplitConfig(train_fraction=fraction, seed=seed))
    for i, n in enumerate(sizes):
        ids = [e.id for e in out.entries if e.instrument is instruments[i]]
        train = sum(1 for x in ids if out.split[x] is Split.TRAIN)
        if n == 1:
            assert train == 1
        if n >= 5:
            assert abs(train / n - fraction) <= 1.0 / n + 1e-12
