import numpy as np
import pytest

from nodulecad.cli import main
from nodulecad.config import RunConfig, format_config, parse_config
from nodulecad.dataio import parse_detection_file, parse_label_file, parse_manifest
from nodulecad.decode import HeadOutput, decode_grid, format_head_dump
from nodulecad.errors import ParseError, ValidationError
from nodulecad.report import parse_f1_csv, parse_pr_csv

from headutil import head_from_labels
from oracles import center_to_corner, reference_nms


def _ids(tmp_path, ids):
    p = tmp_path / "ids.txt"
    p.write_text("\n".join(ids) + "\n")
    return p


def test_split_280(tmp_path, capsys):
    ids = _ids(tmp_path, [f"ct{i:03d}" for i in range(280)])
    assert main(["split", str(ids), "--train-count", "239", "--seed", "5", "--out-dir", str(tmp_path / "o")]) == 0
    m = parse_manifest((tmp_path / "o" / "split_manifest.txt").read_text())
    assert (len(m.train_ids), len(m.val_ids), m.seed) == (239, 41, 5)


def test_split_default_train_count_from_config(tmp_path):
    ids = _ids(tmp_path, [f"ct{i:03d}" for i in range(280)])
    out = tmp_path / "m.txt"
    assert main(["split", str(ids), "-o", str(out)]) == 0
    assert parse_manifest(out.read_text()).train_ids.__len__() == 239


def test_split_single_id(tmp_path):
    ids = _ids(tmp_path, ["only"])
    out = tmp_path / "m.txt"
    assert main(["split", str(ids), "--train-count", "1", "-o", str(out)]) == 0
    assert parse_manifest(out.read_text()).val_ids == []


def test_split_duplicate_exit_2(tmp_path, capsys):
    ids = _ids(tmp_path, ["a", "b", "a"])
    assert main(["split", str(ids), "--train-count", "1", "-o", str(tmp_path / "m")]) == 2
    assert "duplicate" in capsys.readouterr().err


def test_split_bytes_identical(tmp_path):
    ids = _ids(tmp_path, [f"x{i}" for i in range(40)])
    a, b = tmp_path / "a", tmp_path / "b"
    main(["split", str(ids), "--train-count", "30", "--seed", "11", "-o", str(a)])
    main(["split", str(ids), "--train-count", "30", "--seed", "11", "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()


def _dump(tmp_path, head, name="head.txt"):
    p = tmp_path / name
    p.write_text(format_head_dump(head))
    return p


ANCHORS_2x2 = [(0.5, 0.5), (0.6, 0.6), (0.1, 0.1)]
ANCHOR_FLAG = "0.5,0.5; 0.6,0.6; 0.1,0.1"


def test_decode_zero_dump_threshold_03(tmp_path):
    p = _dump(tmp_path, HeadOutput.zeros(2, ANCHORS_2x2, 1))
    out = tmp_path / "det.txt"
    rc = main(["decode", str(p), "--grid-size", "2", "--anchors", ANCHOR_FLAG, "--conf-thresh", "0.3", "-o", str(out)])
    assert rc == 0
    assert out.read_text() == ""


def test_decode_zero_dump_threshold_02(tmp_path):
    head = HeadOutput.zeros(2, ANCHORS_2x2, 1)
    p = _dump(tmp_path, head)
    out = tmp_path / "det.txt"
    rc = main(["decode", str(p), "--grid-size", "2", "--anchors", ANCHOR_FLAG, "--conf-thresh", "0.2", "-o", str(out)])
    assert rc == 0
    recs = parse_detection_file(out.read_text())
    # per cell: the 0.6 box dies to the 0.5 box (iou 0.69), the 0.1 box survives (iou 0.04)
    assert len(recs) == 8
    assert all(r[1] == 0.25 for r in recs)
    slots = decode_grid(head, 0.2)
    assert len(slots) == 12
    kept = reference_nms([center_to_corner(*s.box.as_tuple()) for s in slots], [0.25] * 12, [0] * 12, 0.45)
    assert len(kept) == len(recs)


@pytest.mark.parametrize(
    "text, extra",
    [
        ("2 1 1\n" + "0 0 0 0 0 0\n" * 4, []),  # A=1 but 3 anchors configured
        ("2 3 1\n" + "0 0 0 0 0 0\n" * 11, []),  # one line short
        ("3 3 1\n" + "0 0 0 0 0 0\n" * 27, []),  # grid 3 vs configured 2
    ],
)
def test_decode_shape_mismatch(tmp_path, text, extra):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    assert main(["decode", str(p), "--grid-size", "2", "--anchors", ANCHOR_FLAG, "-o", str(tmp_path / "o")] + extra) == 2


def test_evaluate_perfect(tmp_path, fixtures_dir, capsys):
    root = fixtures_dir / "perfect"
    out = tmp_path / "ev"
    assert main(["evaluate", str(root / "labels"), str(root / "detections"), "--out-dir", str(out)]) == 0
    text = capsys.readouterr().out
    assert "mAP@0.2 = 1.000000" in text
    all_row = [ln for ln in text.splitlines() if ln.strip().startswith("all")][0].split()
    assert all_row[5:9] == ["1.0000"] * 4
    for name in ("pr_curve.csv", "f1_curve.csv", "pr_curve.svg", "f1_curve.svg", "report.txt"):
        assert (out / name).exists()


def test_evaluate_fixture_a(tmp_path, fixtures_dir, capsys):
    root = fixtures_dir / "fixture-A"
    expected = float((root / "expected_map.txt").read_text().split()[-1])
    out = tmp_path / "ev"
    assert main(["evaluate", str(root / "labels"), str(root / "detections"), "--out-dir", str(out)]) == 0
    line = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("mAP@")][0]
    assert float(line.split("=")[1]) == pytest.approx(expected, abs=1e-4)


def test_evaluate_csv_reparse(tmp_path, fixtures_dir):
    root = fixtures_dir / "fixture-A"
    out = tmp_path / "ev"
    main(["evaluate", str(root / "labels"), str(root / "detections"), "--out-dir", str(out)])
    pr_text = (out / "pr_curve.csv").read_text()
    assert pr_text.startswith("# iou_threshold=0.2\n# interpolation=all-points")
    curve = parse_pr_csv(pr_text)
    assert curve.gt_count > 0 and curve.points
    rec = [p.recall for p in curve.points]
    assert rec == sorted(rec)
    f1pts = parse_f1_csv((out / "f1_curve.csv").read_text())
    assert f1pts[0][1] == 0.0
    svg = (out / "pr_curve.svg").read_text()
    assert svg.count("<polyline") == 1 and 'version="1.1"' in svg


def test_evaluate_empty_labels_exit_3(tmp_path):
    lab, det = tmp_path / "l", tmp_path / "d"
    lab.mkdir()
    det.mkdir()
    (lab / "a.txt").write_text("")
    (det / "a.txt").write_text("0 0.9 0.5 0.5 0.1 0.1\n")
    assert main(["evaluate", str(lab), str(det), "--out-dir", str(tmp_path / "o")]) == 3


def test_evaluate_malformed_names_file_and_line(tmp_path, capsys):
    lab, det = tmp_path / "l", tmp_path / "d"
    lab.mkdir()
    det.mkdir()
    (lab / "a.txt").write_text("0 0.5 0.5 0.1 0.1\n0 0.5 0.5 oops 0.1\n")
    assert main(["evaluate", str(lab), str(det), "--out-dir", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "a.txt" in err and "line 2" in err


def test_evaluate_orphan_detection_file(tmp_path):
    lab, det = tmp_path / "l", tmp_path / "d"
    lab.mkdir()
    det.mkdir()
    (lab / "a.txt").write_text("0 0.5 0.5 0.1 0.1\n")
    (det / "b.txt").write_text("0 0.9 0.5 0.5 0.1 0.1\n")
    assert main(["evaluate", str(lab), str(det), "--out-dir", str(tmp_path / "o")]) == 2


def encode_decode_evaluate(tmp_path, labels_dir):
    """Encode every label file to a head dump, decode it via the CLI, evaluate."""
    anchors = [(0.05, 0.05), (0.1, 0.1), (0.2, 0.2)]
    flag = "; ".join(f"{w},{h}" for w, h in anchors)
    det_dir = tmp_path / "det"
    det_dir.mkdir()
    for f in sorted(labels_dir.glob("*.txt")):
        head = head_from_labels(parse_label_file(f.read_text()), 13, anchors, 2)
        dump = _dump(tmp_path, head, f"{f.stem}.head")
        rc = main(["decode", str(dump), "--grid-size", "13", "--anchors", flag, "-o", str(det_dir / f.name)])
        assert rc == 0
    return main(["evaluate", str(labels_dir), str(det_dir), "--out-dir", str(tmp_path / "ev")])


def test_encode_decode_evaluate_roundtrip(tmp_path, fixtures_dir, capsys):
    assert encode_decode_evaluate(tmp_path, fixtures_dir / "fixture-A" / "labels") == 0
    assert "mAP@0.2 = 1.000000" in capsys.readouterr().out


def test_check_grads_default(capsys):
    assert main(["check-grads"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 2


def test_check_grads_zero_trials():
    assert main(["check-grads", "--trials", "0"]) == 2


def test_check_grads_deterministic(capsys):
    main(["check-grads", "--trials", "5", "--seed", "3"])
    a = capsys.readouterr().out
    main(["check-grads", "--trials", "5", "--seed", "3"])
    assert capsys.readouterr().out == a


def test_bad_flag_threshold_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["check-grads", "--iou-thresh", "1.5"])
    assert exc.value.code == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# run\ntrain_count = 3\nseed = 4\nepochs = 100\n")
    ids = _ids(tmp_path, list("abcdef"))
    out = tmp_path / "m"
    assert main(["split", str(ids), "--config", str(cfg), "--seed", "9", "-o", str(out)]) == 0
    m = parse_manifest(out.read_text())
    assert m.seed == 9 and len(m.train_ids) == 3


def test_config_roundtrip_and_unknown_key():
    cfg = RunConfig(iou_threshold=0.3, anchors=((0.1, 0.2),))
    assert RunConfig().update(**parse_config(format_config(cfg))) == cfg
    with pytest.raises(ParseError):
        parse_config("bogus = 1\n")


def test_config_validation():
    with pytest.raises(ValidationError):
        RunConfig(nms_threshold=2.0).validate()
    with pytest.raises(ValidationError):
        RunConfig(grid_size=0).validate()


def test_unknown_config_key_exit_2(tmp_path):
    cfg = tmp_path / "c"
    cfg.write_text("colour = blue\n")
    assert main(["check-grads", "--config", str(cfg)]) == 2
