import csv
import io
import json

import numpy as np
import pytest

from signdynkin.cli import main
from signdynkin.records import FIELDS, META_FIELDS


def _write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(path)


@pytest.fixture
def two(tmp_path):
    return _write(tmp_path, "two.json", {"states": ["a", "b"], "Q": [[-2, 1], [1, -2]], "S": [[1, -1], [-1, 1]]})


@pytest.fixture
def path5(tmp_path):
    q = np.zeros((5, 5))
    for i in range(4):
        q[i, i + 1] = q[i + 1, i] = 1.0
    np.fill_diagonal(q, -(q.sum(axis=1) + 0.5))
    s = np.ones((5, 5))
    s[1, 2] = s[2, 1] = -1
    return _write(tmp_path, "path5.json", {"Q": q.tolist(), "S": s.tolist()})


def _run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr()


def test_validate(two, capsys):
    code, out = _run(capsys, ["validate", two])
    assert code == 0
    doc = json.loads(out.out)
    assert doc["result"]["transience_mode"] == "both"
    assert doc["rows"][0]["x"] == "both"
    assert len(doc["meta"]["chain_digest"]) == 64


def test_validate_conservative_fails(tmp_path, capsys):
    f = _write(tmp_path, "c.json", {"Q": [[-1, 1], [1, -1]]})
    code, _ = _run(capsys, ["validate", f])
    assert code == 1


@pytest.mark.parametrize(
    "text", ['{"Q": [[-2, 1], [1]]}', '{"Q": [[-2, 1], [1, -2]', "not json"]
)
def test_malformed_file_is_input_error(tmp_path, capsys, text):
    code, out = _run(capsys, ["validate", _write(tmp_path, "bad.json", text)])
    assert code == 2
    assert "error" in out.err


def test_missing_file_is_input_error(tmp_path, capsys):
    code, _ = _run(capsys, ["validate", str(tmp_path / "nope.json")])
    assert code == 2


def test_covariance_methods(two, capsys):
    for method in ("direct", "neumann"):
        code, out = _run(capsys, ["covariance", two, "--method", method])
        assert code == 0
        cov = np.array(json.loads(out.out)["result"]["covariance"])
        assert np.allclose(cov, np.array([[2, -1], [-1, 2]]) / 3, atol=1e-11)


def test_covariance_of_invalid_chain(tmp_path, capsys):
    f = _write(tmp_path, "c.json", {"Q": [[-1, 1], [1, -1]]})
    code, _ = _run(capsys, ["covariance", f])
    assert code == 1


def test_predict_direct_and_eliminate(path5, capsys):
    code, out = _run(capsys, ["predict", path5, "--target", "3", "--given", "1,5"])
    assert code == 0
    direct = json.loads(out.out)["result"]["coefficients"]
    code, out = _run(capsys, ["predict", path5, "--target", "3", "--given", "1,5",
                              "--method", "eliminate", "--order", "4,2", "--trace"])
    assert code == 0
    doc = json.loads(out.out)
    assert doc["result"]["elimination_order"] == ["4", "2"]
    assert [t["vertex"] for t in doc["result"]["trace"]] == ["4", "2"]
    assert all(r["passed"] for r in doc["rows"])
    assert [r["mean"] for r in doc["rows"]] == pytest.approx([direct["1"], direct["5"]], abs=1e-12)


def test_predict_bad_order(path5, capsys):
    code, _ = _run(capsys, ["predict", path5, "--target", "3", "--given", "1,5",
                            "--method", "eliminate", "--order", "4"])
    assert code == 2


def test_predict_unknown_state(path5, capsys):
    code, _ = _run(capsys, ["predict", path5, "--target", "9", "--given", "1"])
    assert code == 2


def test_predict_mc(path5, capsys):
    code, out = _run(capsys, ["predict", path5, "--target", "3", "--given", "1,5",
                              "--method", "mc", "--paths", "5000"])
    assert code == 0
    assert all(r["n"] == 5000 for r in json.loads(out.out)["rows"])


def test_simulate(two, capsys):
    code, out = _run(capsys, ["simulate", two, "--start", "a", "--paths", "5000"])
    assert code == 0
    rows = json.loads(out.out)["rows"]
    assert {r["name"] for r in rows} == {"occupation", "net_occupation"}


@pytest.mark.parametrize(
    "extra",
    [
        ["--suite", "occupation"],
        ["--suite", "hitting", "--target", "3", "--given", "1,5"],
        ["--suite", "isomorphism", "--x", "1", "--y", "2", "--d", "1:1,2:0.5"],
        ["--suite", "cond-independence", "--A", "1,2", "--B", "3", "--C", "4,5"],
        ["--suite", "claim41"],
    ],
)
def test_verify_suites_pass(path5, capsys, extra):
    code, out = _run(capsys, ["verify", path5, "--paths", "4000", *extra])
    assert code == 0, out.out
    assert json.loads(out.out)["meta"]["suite"] == extra[1]


def test_verify_hitting_needs_sets(path5, capsys):
    code, _ = _run(capsys, ["verify", path5, "--suite", "hitting"])
    assert code == 2


def test_insufficient_samples_exit_code(tmp_path, capsys):
    f = _write(tmp_path, "k.json", {"Q": [[-2, 1], [1, -1]]})
    code, out = _run(capsys, ["verify", f, "--suite", "isomorphism", "--x", "1", "--y", "2",
                              "--d", "1:1", "--paths", "200"])
    assert code == 3
    assert "n_paths" in out.err


def test_csv_output(two, tmp_path, capsys):
    target = tmp_path / "out.csv"
    code, _ = _run(capsys, ["covariance", two, "--format", "csv", "-o", str(target)])
    assert code == 0
    rows = list(csv.reader(io.StringIO(target.read_text())))
    assert tuple(rows[0]) == FIELDS + META_FIELDS
    assert len(rows) == 5
    first = dict(zip(rows[0], rows[1]))
    assert float(first["mean"]) == pytest.approx(2 / 3, abs=1e-15)
    _, out = _run(capsys, ["covariance", two])
    exact = json.loads(out.out)["rows"][0]["mean"]
    assert first["mean"] == format(exact, ".17g")
    assert float(first["mean"]) == exact
    assert first["seed"] == "0"


def test_rerun_is_bit_identical(two, tmp_path, capsys):
    outs = []
    for i in range(2):
        target = tmp_path / f"run{i}.csv"
        main(["verify", two, "--suite", "occupation", "--paths", "3000", "--seed", "5",
              "--format", "csv", "-o", str(target)])
        outs.append(target.read_bytes())
    assert outs[0] == outs[1]


def test_ou_corrected_and_raw(capsys):
    code, out = _run(capsys, ["ou", "--a", "0.5", "--n", "6"])
    assert code == 0
    code, out = _run(capsys, ["ou", "--a", "0.5", "--n", "4", "--signed", "+,-,+"])
    assert code == 0
    code, out = _run(capsys, ["ou", "--a", "0.5", "--n", "4", "--boundary", "raw"])
    assert code == 0
    assert json.loads(out.out)["result"]["max_gap"] > 0.1


def test_ou_noisy(capsys):
    code, out = _run(capsys, ["ou", "--noisy", "1,3,4:1", "--query", "2", "--values", "0.5,-1,2"])
    assert code == 0
    doc = json.loads(out.out)["result"]
    assert doc["max_gap"]["recurrence"] < 1e-12
    assert doc["max_gap"]["one_sequence"] > 1e-3


def test_ou_bad_signs(capsys):
    code, _ = _run(capsys, ["ou", "--n", "4", "--signed", "+,-"])
    assert code == 2


def test_verify_occupation_two_state_seed7(tmp_path, capsys):
    f = _write(tmp_path, "q2.json", {"Q": [[-2, 1], [1, -2]]})
    code, out = _run(capsys, ["verify", f, "--suite", "occupation", "--paths", "100000", "--seed", "7"])
    assert code == 0
    rows = json.loads(out.out)["rows"]
    assert len(rows) == 8 and all(abs(r["z_score"]) <= 3 for r in rows)


def test_verify_restriction_suite_five_state(path5, capsys):
    code, out = _run(capsys, ["verify", path5, "--suite", "claim41"])
    assert code == 0
    rows = json.loads(out.out)["rows"]
    assert len(rows) == 5 and max(r["mean"] for r in rows) <= 1e-10


def test_verify_isomorphism_one_state(tmp_path, capsys):
    f = _write(tmp_path, "one.json", {"Q": [[-1]]})
    code, out = _run(capsys, ["verify", f, "--suite", "isomorphism", "--d", "1:1", "--paths", "20000"])
    assert code == 0
    assert json.loads(out.out)["result"]["analytic"] == 2 ** -1.5
