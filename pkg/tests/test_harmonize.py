import numpy as np
import pytest

from conftest import cube_mask, grid_of, label_volume, random_blob
from oar_evalkit.errors import GeometryError, UnknownStructureError
from oar_evalkit.harmonize import (CaseStats, ComplementPolicy, FilterRules,
                                   complement_missing, decompose_labels,
                                   filter_cases, keep_largest_component,
                                   merge_labels, resolve_overlaps)
from oar_evalkit.manifest import CaseRecord, Manifest

from oracles import flood_fill_components

SHAPE = (8, 8, 8)


def _mask(*voxels):
    m = np.zeros(SHAPE, dtype=bool)
    for v in voxels:
        m[v] = True
    return m


class TestMergeLabels:
    def test_bowel_components_union(self, schema):
        stomach = _mask((0, 0, 0))
        small = _mask((1, 1, 1))
        large = _mask((2, 2, 2))
        out = merge_labels([(stomach, "stomach"), (small, "small_intestine"),
                            (large, "large_intestine")], schema)
        assert set(out) == {"stomach_bowel"}
        assert int(out["stomach_bowel"].sum()) == 3

    def test_overlapping_sources_do_not_double_count(self, schema):
        a = _mask((0, 0, 0), (1, 1, 1))
        b = _mask((1, 1, 1), (2, 2, 2))
        out = merge_labels([(a, "stomach"), (b, "large_intestine")], schema)
        assert int(out["stomach_bowel"].sum()) == 3

    def test_canonical_name_passes_through(self, schema):
        spleen = _mask((3, 3, 3))
        out = merge_labels([(spleen, "spleen")], schema)
        assert set(out) == {"spleen"}
        assert np.array_equal(out["spleen"], spleen)

    def test_unknown_structure(self, schema):
        with pytest.raises(UnknownStructureError):
            merge_labels([(_mask((0, 0, 0)), "gallbladder")], schema)

    def test_shape_mismatch(self, schema):
        a = np.zeros((4, 4, 4), dtype=bool)
        b = np.zeros((5, 5, 5), dtype=bool)
        with pytest.raises(GeometryError):
            merge_labels([(a, "spleen"), (b, "liver")], schema)

    def test_clinical_composite_name_normalized(self, schema):
        m = _mask((1, 2, 3))
        out = merge_labels([(m, "Stomach-Intestine-Bowel")], schema)
        assert set(out) == {"stomach_bowel"}


class TestDecompose:
    def test_splits_by_code(self, schema):
        v = np.zeros(SHAPE, dtype=np.uint8)
        v[0, 0, 0] = schema.code_of("spleen")
        v[1, 1, 1] = schema.code_of("liver")
        masks = decompose_labels(label_volume(v), schema)
        assert set(masks) == {"spleen", "liver"}

    def test_unknown_code_rejected(self, schema):
        v = np.zeros(SHAPE, dtype=np.uint8)
        v[0, 0, 0] = 99
        with pytest.raises(UnknownStructureError):
            decompose_labels(label_volume(v), schema)


class TestComplement:
    def test_auxiliary_fills_missing_heart(self, schema):
        aux_heart = _mask((4, 4, 4))
        masks, prov = complement_missing({}, {"heart": aux_heart}, schema)
        assert prov["heart"] == "auxiliary"
        assert np.array_equal(masks["heart"], aux_heart)

    def test_clinical_wins_over_auxiliary(self, schema):
        clin = _mask((1, 1, 1))
        aux = _mask((2, 2, 2))
        masks, prov = complement_missing({"spleen": clin}, {"spleen": aux}, schema)
        assert prov["spleen"] == "clinical"
        assert np.array_equal(masks["spleen"], clin)

    def test_both_absent(self, schema):
        masks, prov = complement_missing({}, {}, schema)
        assert masks == {}
        assert all(v == "absent" for v in prov.values())
        assert set(prov) == set(schema.names())

    def test_non_complementable_type1_stays_absent(self, schema):
        aux = _mask((2, 2, 2))
        masks, prov = complement_missing({}, {"spleen": aux}, schema)
        assert "spleen" not in masks
        assert prov["spleen"] == "absent"

    def test_every_type2_complementable(self, schema):
        aux = {name: _mask((1, 2, 3)) for name in schema.type2_names()}
        masks, prov = complement_missing({}, aux, schema)
        assert all(prov[n] == "auxiliary" for n in schema.type2_names())

    def test_empty_clinical_mask_counts_as_missing(self, schema):
        empty = np.zeros(SHAPE, dtype=bool)
        aux = _mask((3, 3, 3))
        masks, prov = complement_missing({"heart": empty}, {"heart": aux}, schema)
        assert prov["heart"] == "auxiliary"

    def test_policy_override(self, schema):
        aux = _mask((2, 2, 2))
        policy = ComplementPolicy(type1_organs=frozenset({"spleen"}))
        masks, prov = complement_missing({}, {"spleen": aux}, schema, policy)
        assert prov["spleen"] == "auxiliary"

    def test_never_overwrites_nonempty_clinical(self, schema, rng):
        for _ in range(20):
            clin = {n: random_blob(rng, SHAPE) for n in
                    rng.choice(schema.names(), size=5, replace=False)}
            aux = {n: random_blob(rng, SHAPE) for n in schema.names()}
            masks, prov = complement_missing(clin, aux, schema)
            for name, mask in clin.items():
                assert prov[name] == "clinical"
                assert np.array_equal(masks[name], mask)


class TestResolveOverlaps:
    def test_liver_beats_stomach_bowel(self, schema):
        voxel = (3, 3, 3)
        out = resolve_overlaps({"liver": _mask(voxel), "stomach_bowel": _mask(voxel)},
                               schema, grid_of(SHAPE))
        assert out.voxels[voxel] == schema.code_of("liver")

    def test_spleen_beats_pancreas(self, schema):
        voxel = (2, 2, 2)
        out = resolve_overlaps({"pancreas": _mask(voxel), "spleen": _mask(voxel)},
                               schema, grid_of(SHAPE))
        assert out.voxels[voxel] == schema.code_of("spleen")

    def test_type1_lung_beats_type2_vertebrae(self, schema):
        voxel = (1, 5, 5)
        out = resolve_overlaps({"vertebrae": _mask(voxel), "lung_left": _mask(voxel)},
                               schema, grid_of(SHAPE))
        assert out.voxels[voxel] == schema.code_of("lung_left")

    def test_disjoint_masks_pass_through(self, schema):
        masks = {"spleen": _mask((0, 0, 0)), "liver": _mask((5, 5, 5))}
        out = resolve_overlaps(masks, schema, grid_of(SHAPE))
        assert out.voxels[0, 0, 0] == schema.code_of("spleen")
        assert out.voxels[5, 5, 5] == schema.code_of("liver")
        assert int((out.voxels != 0).sum()) == 2

    def test_unknown_organ(self, schema):
        with pytest.raises(UnknownStructureError):
            resolve_overlaps({"gallbladder": _mask((0, 0, 0))}, schema,
                             grid_of(SHAPE))

    def test_idempotent_and_priority_correct(self, schema, rng):
        names = schema.names()
        for _ in range(25):
            chosen = rng.choice(names, size=rng.integers(2, 7), replace=False)
            masks = {n: random_blob(rng, (6, 6, 6), p=0.3) for n in chosen}
            grid = grid_of((6, 6, 6))
            out = resolve_overlaps(masks, schema, grid)
            # every contested voxel goes to the best-ranked claimant
            for idx in np.ndindex((6, 6, 6)):
                claimants = [n for n, m in masks.items() if m[idx]]
                if not claimants:
                    assert out.voxels[idx] == 0
                else:
                    winner = min(claimants, key=schema.priority_rank)
                    assert out.voxels[idx] == schema.code_of(winner)
            # idempotence: decompose the output and resolve again
            again = resolve_overlaps(
                {n: out.voxels == schema.code_of(n) for n in chosen
                 if (out.voxels == schema.code_of(n)).any()},
                schema, grid)
            assert np.array_equal(again.voxels, out.voxels)


class TestKeepLargestComponent:
    def test_size_order(self):
        m = np.zeros(SHAPE, dtype=bool)
        m[0:2, 0:5, 0] = True          # 10 voxels
        m[6, 6, 5:8] = True            # 3 voxels
        out = keep_largest_component(m, 26)
        assert int(out.sum()) == 10
        assert not out[6, 6, 5]

    def test_single_component_unchanged(self):
        m = cube_mask(SHAPE, (1, 1, 1), (3, 3, 3))
        out = keep_largest_component(m, 26)
        assert np.array_equal(out, m)

    def test_empty_unchanged(self):
        m = np.zeros(SHAPE, dtype=bool)
        assert not keep_largest_component(m, 26).any()

    def test_diagonal_voxels_connectivity_dependent(self):
        m = np.zeros(SHAPE, dtype=bool)
        m[0, 0, 0] = True
        m[1, 1, 1] = True
        out26 = keep_largest_component(m, 26)
        assert int(out26.sum()) == 2  # single diagonal component
        out6 = keep_largest_component(m, 6)
        assert int(out6.sum()) == 1   # two components; tie -> lower flat index
        assert out6[0, 0, 0] and not out6[1, 1, 1]

    def test_matches_flood_fill_oracle(self, rng):
        for connectivity in (6, 18, 26):
            for _ in range(15):
                m = rng.random((6, 6, 6)) < 0.25
                out = keep_largest_component(m, connectivity)
                comps = flood_fill_components(m, connectivity)
                if not comps:
                    assert not out.any()
                    continue
                best_size = max(len(c) for c in comps)
                ties = [c for c in comps if len(c) == best_size]
                expect = min(ties, key=lambda c: min(
                    np.ravel_multi_index(v, m.shape) for v in c))
                got = {tuple(v) for v in np.argwhere(out)}
                assert got == expect

    def test_output_never_grows(self, rng):
        for _ in range(10):
            m = rng.random(SHAPE) < 0.2
            out = keep_largest_component(m, 26)
            assert out.sum() <= m.sum()
            assert not (out & ~m).any()


class TestFilterCases:
    @staticmethod
    def _manifest(n=3):
        cases = tuple(
            CaseRecord(case_id=f"c{i}", patient_id=f"p{i}", image_path=f"c{i}.nii")
            for i in range(n))
        return Manifest(cases)

    def test_slice_count_exclusion(self):
        m = self._manifest(2)
        stats = {"c0": CaseStats(79, 0), "c1": CaseStats(183, 0)}
        result = filter_cases(m, FilterRules((80, 400), 4), stats)
        assert [c.case_id for c in result.included] == ["c1"]
        assert result.excluded[0].case_id == "c0"
        assert result.excluded[0].reason == "slice_count"

    def test_missing_organ_exclusion(self):
        m = self._manifest(2)
        stats = {"c0": CaseStats(183, 5), "c1": CaseStats(183, 4)}
        result = filter_cases(m, FilterRules((80, 400), 4), stats)
        assert [c.case_id for c in result.included] == ["c1"]
        assert result.excluded[0].reason == "missing_organs"

    def test_included_case(self):
        m = self._manifest(1)
        result = filter_cases(m, FilterRules((80, 400), 4),
                              {"c0": CaseStats(183, 0)})
        assert len(result.included) == 1 and not result.excluded

    def test_partition_property(self, rng):
        m = self._manifest(20)
        stats = {f"c{i}": CaseStats(int(rng.integers(10, 500)),
                                    int(rng.integers(0, 8)))
                 for i in range(20)}
        result = filter_cases(m, FilterRules((80, 400), 4), stats)
        included = {c.case_id for c in result.included}
        excluded = {e.case_id for e in result.excluded}
        assert included | excluded == {f"c{i}" for i in range(20)}
        assert not included & excluded

    def test_boundary_slices_inclusive(self):
        m = self._manifest(2)
        stats = {"c0": CaseStats(80, 0), "c1": CaseStats(400, 0)}
        result = filter_cases(m, FilterRules((80, 400), 4), stats)
        assert len(result.included) == 2
