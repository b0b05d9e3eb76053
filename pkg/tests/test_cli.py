import json

import pytest

from hyperperc import cli, ncpart

TRIANGLE_ROOT = 0.347296355334


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestPartitions:
    def test_k3_lists_paper_table(self, capsys):
        code, out, _ = run(capsys, "partitions", "--k", "3")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[1] == "index,partition,dual,blocks,dual_blocks"
        body = lines[2:]
        assert len(body) == 5
        assert body[0] == "0,0|1|2,012,3,1"      # bottom -> top of edges
        assert body[-1] == "4,012,0|1|2,1,3"     # top -> bottom

    def test_k4_has_14_rows(self, capsys):
        code, out, _ = run(capsys, "partitions", "--k", "4")
        assert code == 0
        assert len(out.strip().splitlines()) == 2 + 14

    def test_k1(self, capsys):
        code, out, _ = run(capsys, "partitions", "--k", "1")
        assert code == 0
        assert len(out.strip().splitlines()) == 3

    def test_capacity_exit_code(self, capsys):
        code, _, err = run(capsys, "partitions", "--k", "13")
        assert code == 3
        assert "capacity" in err

    def test_json_format(self, capsys):
        code, out, _ = run(capsys, "partitions", "--k", "3", "--format", "json")
        obj = json.loads(out)
        assert obj["count"] == 5


class TestSolve:
    def test_triangle_builtin(self, capsys):
        code, out, _ = run(capsys, "solve", "--generator", "triangle",
                           "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert obj["roots"][0] == pytest.approx(TRIANGLE_ROOT, abs=1e-9)

    def test_star_builtin(self, capsys):
        code, out, _ = run(capsys, "solve", "--generator", "star",
                           "--format", "json")
        obj = json.loads(out)
        assert obj["roots"][0] == pytest.approx(1 - TRIANGLE_ROOT, abs=1e-9)

    def test_generator_file(self, capsys, tmp_path):
        path = tmp_path / "gen.json"
        path.write_text(json.dumps({
            "terminals": ["A", "B", "C"],
            "bonds": [{"u": "A", "v": "B", "p": [0, 1]},
                      {"u": "B", "v": "C", "p": [0, 1]},
                      {"u": "C", "v": "A", "p": [0, 1]}]}))
        code, out, _ = run(capsys, "solve", "--generator", str(path),
                           "--format", "json")
        assert code == 0
        assert json.loads(out)["roots"][0] == pytest.approx(TRIANGLE_ROOT)

    def test_no_root_exit_code(self, capsys, tmp_path):
        path = tmp_path / "const.json"
        path.write_text(json.dumps({
            "terminals": ["A", "B", "C"],
            "bonds": [{"u": "A", "v": "B", "p": ["9/10"]},
                      {"u": "B", "v": "C", "p": ["9/10"]},
                      {"u": "C", "v": "A", "p": ["9/10"]}]}))
        code, out, _ = run(capsys, "solve", "--generator", str(path),
                           "--format", "json")
        assert code == 4
        assert json.loads(out)["status"] == "no-root"

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "solve", "--generator", "nope.json")
        assert code == 2


class TestScan:
    def test_csv_shape_and_seed_header(self, tmp_path, capsys):
        out_path = tmp_path / "scan.csv"
        code, _, _ = run(capsys, "scan", "--lattice", "tri",
                         "--family", "competition", "--sizes", "4,6",
                         "--param-grid", "0.4:0.6:0.1", "--trials", "50",
                         "--seed", "7", "--out", str(out_path))
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert any("seed=7" in line for line in lines if line.startswith("#"))
        header_idx = next(i for i, l in enumerate(lines) if not l.startswith("#"))
        assert lines[header_idx] == "L,param,trials,hits,estimate,ci95"
        assert len(lines) - header_idx - 1 == 2 * 3

    def test_reruns_are_byte_identical(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["scan", "--lattice", "tri", "--sizes", "5",
                "--param-grid", "0.5:0.5:0.1", "--trials", "64", "--seed", "11"]
        assert cli.main(args + ["--out", str(a)]) == 0
        assert cli.main(args + ["--out", str(b)]) == 0
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_thread_count_does_not_change_output(self, tmp_path, capsys):
        outs = []
        for threads in ("1", "4", "8"):
            path = tmp_path / f"t{threads}.csv"
            code = cli.main(["scan", "--lattice", "tri", "--sizes", "5",
                             "--param-grid", "0.45:0.55:0.05", "--trials",
                             "100", "--seed", "3", "--threads", threads,
                             "--out", str(path)])
            assert code == 0
            outs.append(path.read_bytes())
        capsys.readouterr()
        assert outs[0] == outs[1] == outs[2]

    def test_auto_seed_recorded(self, capsys):
        code, out, _ = run(capsys, "scan", "--lattice", "tri", "--sizes", "4",
                           "--param-grid", "0.5:0.5:0.1", "--trials", "10")
        assert code == 0
        seed_line = next(l for l in out.splitlines() if "seed=" in l)
        seed = int(seed_line.split("seed=")[1].split()[0])
        assert seed > 0

    def test_bad_grid(self, capsys):
        code, _, err = run(capsys, "scan", "--lattice", "tri",
                           "--param-grid", "oops")
        assert code == 2


class TestSurvey:
    def test_survey_table(self, capsys):
        code, out, _ = run(capsys, "survey", "--lattice", "tri", "--family",
                           "competition", "--param", "0.5", "--size", "8",
                           "--trials", "40", "--seed", "2",
                           "--radii", "1,2,4")
        assert code == 0
        lines = out.strip().splitlines()
        header_idx = next(i for i, l in enumerate(lines) if not l.startswith("#"))
        assert lines[header_idx] == "r,count,fraction"
        assert len(lines) - header_idx - 1 == 3


class TestCheck:
    def _vec_file(self, tmp_path, p):
        path = tmp_path / f"vec{p}.json"
        path.write_text(json.dumps(
            ncpart.vector_to_json(ncpart.competition_vector(p))))
        return str(path)

    def test_self_dual_at_half(self, tmp_path, capsys):
        code, out, _ = run(capsys, "check", "--lattice", "tri",
                           "--vectors", self._vec_file(tmp_path, 0.5),
                           "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert obj == {"nondegenerate": True, "malleable": True,
                       "self_dual": True, "witness": obj["witness"]}

    def test_not_self_dual_off_half(self, tmp_path, capsys):
        code, out, _ = run(capsys, "check", "--lattice", "tri",
                           "--vectors", self._vec_file(tmp_path, 0.6),
                           "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert obj["self_dual"] is False
        assert obj["nondegenerate"] is True

    def test_invalid_vector_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        obj = ncpart.vector_to_json(ncpart.competition_vector(0.5))
        obj["entries"][0]["p"] = 0.9
        path.write_text(json.dumps(obj))
        code, _, err = run(capsys, "check", "--lattice", "tri",
                           "--vectors", str(path))
        assert code == 2
        assert "validation" in err


class TestHarris:
    def test_counterexample_report(self, capsys):
        code, out, _ = run(capsys, "harris", "--poset", "counterexample",
                           "--p0", "0.2", "--format", "json")
        assert code == 0
        checks = json.loads(out)["checks"]
        assert checks[0]["exponent"] == 1 and checks[0]["holds"] is False
        assert checks[1]["exponent"] == 10 and checks[1]["holds"] is True
        assert checks[0]["lhs"] == pytest.approx(0.2)

    def test_nc3_exhaustive_all_hold(self, capsys):
        code, out, _ = run(capsys, "harris", "--poset", "nc", "--k", "3",
                           "--format", "json")
        assert code == 0
        checks = json.loads(out)["checks"]
        assert len(checks) == 55  # 10 upsets -> C(10,2)+10 ordered-free pairs
        assert all(c["holds"] for c in checks)

    def test_trivial_upsets_give_equality_rows(self, capsys):
        code, out, _ = run(capsys, "harris", "--poset", "nc", "--k", "1",
                           "--format", "json")
        checks = json.loads(out)["checks"]
        full = [c for c in checks if c["prob_a"] == 1.0 and c["prob_b"] == 1.0]
        assert full and all(c["lhs"] == 1.0 and c["rhs"] == 1.0 for c in full)
