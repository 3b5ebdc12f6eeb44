import json
import math

import numpy as np
import pytest

import pgpnet

CORPUS = "\n".join(
    [
        '{"id":"a","diagnoses":["X"],"pills":[0,1]}',
        '{"id":"b","diagnoses":["Y"],"pills":[2]}',
        '{"id":"c","diagnoses":["X","Y"],"pills":[1,2]}',
    ]
)


def test_co_graph_is_symmetric_and_bounded():
    w = pgpnet.co_graph(CORPUS, 3)
    assert w.shape == (3, 3)
    assert np.array_equal(w, w.T)
    assert w.min() >= 0.0 and w.max() <= 1.0 + 1e-12


def test_size_graph_ratio_and_reciprocity():
    ann = '{"image":"i","boxes":[{"x":0,"y":0,"w":10,"h":10,"label":0},{"x":20,"y":0,"w":20,"h":10,"label":1}]}'
    w, known = pgpnet.size_graph(ann, 3)
    assert known[0, 1] and not known[0, 2]
    assert w[1, 0] == pytest.approx(2.0)
    assert w[0, 1] * w[1, 0] == pytest.approx(1.0)


def test_condense_uniform_logits_give_mean():
    a = np.arange(9, dtype=float).reshape(3, 3)
    out = pgpnet.condense(a, np.zeros((4, 3)))
    assert out.shape == (4, 4)
    assert np.allclose(out, a.mean(), atol=1e-12)


def test_map_report_perfect_detections():
    truth = [("im", (0, 0, 10, 10), 0), ("im", (30, 30, 8, 8), 1)]
    dets = [(img, box, label, 0.8) for img, box, label in truth]
    report = pgpnet.map_report(dets, truth, 2)
    assert report["map"] == 1.0
    assert math.isclose(pgpnet.iou((0, 0, 10, 10), (5, 0, 10, 10)), 1 / 3)


def test_run_command_reports_config_errors(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"model": {"bogus": 1}}))
    code, _, err = pgpnet.run_command("gen-world", str(cfg))
    assert code == 2
    assert "bogus" in err


def test_invalid_input_raises():
    with pytest.raises(ValueError):
        pgpnet.co_graph('{"id":"a","diagnoses":["X"],"pills":[7]}', 3)
