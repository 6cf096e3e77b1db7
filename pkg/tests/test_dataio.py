import math

import pytest

from scalenorm import BBox, DataFormatError, Detection, generate_dataset
from scalenorm.dataio import (
    dataset_from_dict,
    dataset_to_dict,
    detections_to_records,
    load_annotations,
    load_detections,
    load_oracle_table,
    load_snip_table,
    load_tagged_detections,
    tagged_detections_from_records,
    write_csv,
    write_json,
)

MINIMAL = {
    "images": [{"id": 1, "height": 480, "width": 640}],
    "annotations": [
        {"id": 10, "image_id": 1, "category_id": 1, "bbox": [5, 6, 30, 40], "iscrowd": 0}
    ],
    "categories": [{"id": 1, "name": "object"}],
}


class TestAnnotationIngest:
    def test_minimal_valid(self):
        ds = dataset_from_dict(MINIMAL)
        assert len(ds.instances) == 1
        inst = ds.instances[0]
        assert inst.bbox == BBox(5, 6, 30, 40)
        assert inst.id == 10 and inst.image_id == 1
        assert ds.image_sizes() == {1: (480, 640)}

    def test_dangling_image_reference(self):
        data = dict(MINIMAL, annotations=[dict(MINIMAL["annotations"][0], image_id=42)])
        with pytest.raises(DataFormatError, match="annotation 10.*image 42"):
            dataset_from_dict(data)

    def test_zero_width_box_rejected(self):
        data = dict(
            MINIMAL,
            annotations=[dict(MINIMAL["annotations"][0], bbox=[5, 6, 0, 40])],
        )
        with pytest.raises(DataFormatError, match="annotation 10"):
            dataset_from_dict(data)

    def test_unknown_category_rejected(self):
        data = dict(MINIMAL, annotations=[dict(MINIMAL["annotations"][0], category_id=9)])
        with pytest.raises(DataFormatError, match="annotation 10.*category 9"):
            dataset_from_dict(data)

    def test_duplicate_annotation_id_rejected(self):
        data = dict(MINIMAL, annotations=MINIMAL["annotations"] * 2)
        with pytest.raises(DataFormatError, match="duplicate id"):
            dataset_from_dict(data)

    def test_malformed_json_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(DataFormatError, match="invalid JSON"):
            load_annotations(path)

    def test_round_trip(self, tmp_path):
        ds = generate_dataset(10, 3, crowd_fraction=0.2)
        path = tmp_path / "annotations.json"
        write_json(path, dataset_to_dict(ds))
        back = load_annotations(path)
        assert back.images == ds.images
        assert back.instances == ds.instances
        assert back.categories == ds.categories


class TestDetectionDumps:
    def test_round_trip_flat(self, tmp_path):
        dets = [
            Detection(BBox(1, 2, 3, 4), 1, 0.5, 1, 0),
            Detection(BBox(5, 6, 7, 8), 2, 0.25, 2, 1),
        ]
        path = tmp_path / "dets.json"
        write_json(path, {"detections": detections_to_records(dets)})
        assert load_detections(path) == dets

    def test_bare_list_accepted(self, tmp_path):
        path = tmp_path / "dets.json"
        write_json(path, detections_to_records([Detection(BBox(1, 2, 3, 4), 1, 0.5, 1)]))
        assert len(load_detections(path)) == 1

    def test_tagged_grouping_sorted_by_factor(self, tmp_path):
        records = detections_to_records(
            [Detection(BBox(1, 2, 3, 4), 1, 0.5, 1)], factor=0.5
        ) + detections_to_records([Detection(BBox(2, 2, 3, 4), 1, 0.6, 1)], factor=2.0)
        path = tmp_path / "dets.json"
        write_json(path, records)
        tagged = load_tagged_detections(path)
        assert [factor for factor, _ in tagged] == [2.0, 0.5]
        assert tagged[0][1][0].resolution_index == 0
        assert tagged[1][1][0].resolution_index == 1

    def test_untagged_records_rejected_for_fusion(self):
        records = detections_to_records([Detection(BBox(1, 2, 3, 4), 1, 0.5, 1)])
        with pytest.raises(DataFormatError, match="scale_factor"):
            tagged_detections_from_records(records)

    def test_bad_score_names_record(self, tmp_path):
        path = tmp_path / "dets.json"
        write_json(
            path,
            [{"image_id": 1, "category_id": 1, "bbox": [0, 0, 2, 2], "score": 1.7}],
        )
        with pytest.raises(DataFormatError, match="detection #0"):
            load_detections(path)


class TestTables:
    def test_oracle_table(self, tmp_path):
        path = tmp_path / "table.json"
        write_json(
            path,
            [
                {"range": [0, 640], "ap": 37.4},
                {"range": [16, None], "ap": 38.2},
            ],
        )
        table = load_oracle_table(path)
        assert table[(0.0, 640.0)]["ap"] == 37.4
        assert (16.0, math.inf) in table

    def test_oracle_table_requires_ap(self, tmp_path):
        path = tmp_path / "table.json"
        write_json(path, [{"range": [0, 640]}])
        with pytest.raises(DataFormatError, match="ap"):
            load_oracle_table(path)

    def test_snip_table(self, tmp_path):
        path = tmp_path / "snip.json"
        write_json(
            path,
            [
                {"resolution": [800, 1200], "valid_range": [40, 160]},
                {"resolution": [480, 800], "valid_range": [120, None], "scale_factor": 1.0},
            ],
        )
        table = load_snip_table(path)
        assert table.entries[0].upper == 160.0
        assert table.entries[1].upper == math.inf
        assert table.entries[1].factor == 1.0


class TestWriters:
    def test_write_json_deterministic(self, tmp_path):
        payload = {"b": [1.5, 2.25], "a": {"nested": True}}
        p1, p2 = tmp_path / "one.json", tmp_path / "two.json"
        write_json(p1, payload)
        write_json(p2, payload)
        assert p1.read_bytes() == p2.read_bytes()

    def test_write_json_rejects_nonfinite(self, tmp_path):
        with pytest.raises(ValueError):
            write_json(tmp_path / "bad.json", {"value": math.inf})

    def test_write_csv(self, tmp_path):
        path = tmp_path / "out.csv"
        write_csv(path, ("level", "count"), [(2, 5), (3, 0)])
        assert path.read_text() == "level,count\n2,5\n3,0\n"

    def test_no_partial_files_on_success(self, tmp_path):
        write_json(tmp_path / "ok.json", {"x": 1})
        leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
        assert not leftovers
