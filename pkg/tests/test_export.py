import csv
import io

import numpy as np

from minitwistor.export import FIELDS, csv_text, obj_text, read_csv, records, write_csv, write_obj


def sample_cols():
    nu = np.array([0.1 + 0.2j, 0.5, 3.0 + 3j])
    xi = np.array([0.3 - 0.1j, 1 / 3, np.nan])
    eta = np.array([1e-17 + 2j, -0.25, np.nan])
    r = np.array([1.0, np.nan, np.nan])
    xyz = np.array([[1.0, 2.0, 3.0], [np.nan] * 3, [np.nan] * 3])
    shadow = np.array([False, False, True])
    return records(nu, xi, eta, r, 0.5, xyz, shadow)


def test_header_and_line_endings():
    text = csv_text(sample_cols())
    lines = text.split("\r\n")
    assert lines[0] == ",".join(FIELDS)
    assert lines[-1] == ""
    assert len(lines) == 5


def test_shadow_rows_have_empty_geometry():
    rows = list(csv.DictReader(io.StringIO(csv_text(sample_cols()))))
    last = rows[2]
    assert last["shadow"] == "1"
    assert last["nu_re"] == "3" and last["C"] == "0.5"
    for f in ("xi_re", "xi_im", "eta_re", "eta_im", "r", "x1", "x2", "x3"):
        assert last[f] == ""
    # a non-finite potential is left empty without flagging shadow
    assert rows[1]["shadow"] == "0" and rows[1]["r"] == ""


def test_seventeen_digits_roundtrip(tmp_path):
    cols = sample_cols()
    p = tmp_path / "a.csv"
    write_csv(p, cols)
    back = read_csv(p)
    assert back["xi_re"][1] == 1 / 3
    assert back["eta_re"][0] == 1e-17
    assert np.isnan(back["r"][1])
    assert back["shadow"].tolist() == [False, False, True]
    assert "0.33333333333333331" in p.read_text()


def test_csv_is_deterministic():
    assert csv_text(sample_cols()) == csv_text(sample_cols())


def test_obj(tmp_path):
    xyz = np.array([[0.0, 1.0, 2.0], [np.nan, 0, 0], [0.1, 0.2, 0.3]])
    text = obj_text(xyz, "abc123", 1.5)
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    assert "# scene abc123" in lines
    assert "# offset 1.5" in lines
    assert "# vertices 2" in lines
    verts = [l for l in lines if not l.startswith("#")]
    assert verts == ["v 0 1 2", "v 0.10000000000000001 0.20000000000000001 0.29999999999999999"]
    p = tmp_path / "a.obj"
    write_obj(p, xyz, "abc123", 1.5)
    assert p.read_bytes() == text.encode()
