import json

import pytest

from oar_evalkit.errors import ValidationError
from oar_evalkit.manifest import (CaseRecord, Manifest, load_manifest,
                                  manifest_from_dict, manifest_to_dict,
                                  save_manifest)


def _entry(case_id="c1", **kw):
    base = {
        "case_id": case_id,
        "patient_id": f"p_{case_id}",
        "dataset": "inhouse",
        "age_years": 4.0,
        "sex": "male",
        "tumor_type": "renal",
        "iv_contrast": "no",
        "nephrectomy_side": "left",
        "image_path": f"{case_id}/ct.nii.gz",
        "label_paths": {"multilabel": f"{case_id}/labels.nii.gz"},
    }
    base.update(kw)
    return base


def _write(tmp_path, doc):
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps(doc))
    return p


def test_two_valid_cases(tmp_path):
    p = _write(tmp_path, {"schema_ref": "default",
                          "cases": [_entry("c1"), _entry("c2")]})
    m = load_manifest(p)
    assert len(m) == 2
    assert m.case_ids() == ["c1", "c2"]


def test_duplicate_case_id_rejected(tmp_path):
    p = _write(tmp_path, {"cases": [_entry("c1"), _entry("c1")]})
    with pytest.raises(ValidationError, match="duplicate"):
        load_manifest(p)


def test_fields_carried_through(tmp_path):
    p = _write(tmp_path, {"cases": [_entry("c1", age_years=4.0,
                                           tumor_type="renal",
                                           nephrectomy_side="left")]})
    case = load_manifest(p).case("c1")
    assert case.age_years == 4.0
    assert case.tumor_type == "renal"
    assert case.nephrectomy_side == "left"


def test_missing_required_fields_listed(tmp_path):
    doc = {"cases": [_entry("c1"), {"case_id": "c2"}, {"patient_id": "p3"}]}
    with pytest.raises(ValidationError) as err:
        manifest_from_dict(doc)
    assert len(err.value.records) == 2
    message = str(err.value)
    assert "image_path" in message and "patient_id" in message


def test_unknown_enum_maps_to_unknown_with_warning(tmp_path):
    doc = {"cases": [_entry("c1", sex="diverse", iv_contrast="maybe")]}
    with pytest.warns(UserWarning):
        m = manifest_from_dict(doc)
    assert m.case("c1").sex == "unknown"
    assert m.case("c1").iv_contrast == "unknown"


def test_negative_or_nonfinite_age_rejected():
    with pytest.raises(ValidationError):
        manifest_from_dict({"cases": [_entry("c1", age_years=-1)]})
    with pytest.raises(ValidationError):
        manifest_from_dict({"cases": [_entry("c1", age_years="nan")]})


def test_unknown_keys_ignored():
    m = manifest_from_dict({"cases": [_entry("c1", extra_stuff=17)],
                            "future_field": True})
    assert m.case("c1").case_id == "c1"


def test_empty_manifest_rejected():
    with pytest.raises(ValidationError):
        manifest_from_dict({"cases": []})
    with pytest.raises(ValidationError):
        Manifest(cases=())


def test_round_trip(tmp_path):
    m = manifest_from_dict({"cases": [_entry("c1"), _entry("c2")]})
    out = tmp_path / "m.json"
    save_manifest(m, out)
    again = load_manifest(out)
    assert manifest_to_dict(again) == manifest_to_dict(m)


def test_age_group_binning():
    def rec(age):
        return CaseRecord(case_id="x", patient_id="p", image_path="i",
                          age_years=age)
    assert rec(0.0).age_group() == "0-2"
    assert rec(2.9).age_group() == "0-2"
    assert rec(3.0).age_group() == "3-4"
    assert rec(4.99).age_group() == "3-4"
    assert rec(5.0).age_group() == "5-6"
    assert rec(6.999).age_group() == "5-6"
    assert rec(7.0).age_group() == "7+"
    assert rec(21.0).age_group() == "7+"
