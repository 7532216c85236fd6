import json
import math
import re
import subprocess
import sys

import pytest

from krullwalk import __version__
from krullwalk.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(argv, capsys):
    code, out, err = run(argv, capsys)
    return code, (json.loads(out) if out.strip() else None), err


class TestArtifacts:
    def test_envelope(self, capsys):
        code, art, _ = run_json(["krull-dim", "builtin:lamplighter", "--seed", "4"], capsys)
        assert code == 0
        assert art["tool"] == "krullwalk" and art["version"] == __version__
        assert art["seed"] == 4 and art["exit_status"] == 0 and art["wall_time"] >= 0
        assert art["config"]["file"] == "builtin:lamplighter"
        assert art["result"]["krull_module"] == 1 and art["result"]["krull_group"] == 1

    def test_csv_header(self, capsys):
        code, out, _ = run(["exact-return", "--group", "zd:1", "--nmax", "6", "--epsilon", "0",
                            "--format", "csv"], capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("# krullwalk") and "seed=0" in lines[0]
        assert lines[1] == "n,p_lower,p_upper"
        assert lines[2:] == ["2,1/2,1/2", "4,3/8,3/8", "6,5/16,5/16"]

    def test_out_file(self, tmp_path, capsys):
        path = tmp_path / "a.json"
        assert main(["krull-dim", "builtin:fp_plane", "--out", str(path)]) == 0
        assert capsys.readouterr().out == ""
        assert json.loads(path.read_text())["result"]["krull_module"] == 2

    def test_identical_runs(self, tmp_path):
        def strip(text):
            return re.sub(r'"wall_time": [0-9.e-]+', "", text)
        outs = []
        for i in range(2):
            p = tmp_path / f"{i}.json"
            main(["simulate", "--group", "lamplighter:p=2,d=1", "--ns", "2,4,8", "--samples", "5000",
                  "--seed", "3", "--out", str(p)])
            outs.append(strip(p.read_text()))
        assert outs[0] == outs[1]


class TestCommands:
    def test_witness(self, capsys):
        code, art, _ = run_json(["witness", "builtin:b2p"], capsys)
        res = art["result"]
        assert code == 0 and res["kind"] == "B2p" and res["prime"] == 3 and res["certified"]
        assert len(res["monomials"]["monomials"]) == 2

    def test_find_transcendental(self, capsys):
        code, art, _ = run_json(["find-transcendental", "builtin:fp_plane", "--target", "2"], capsys)
        assert code == 0 and art["result"]["monomials"] == [[1, 0], [0, 1]]

    def test_find_transcendental_deficit(self, capsys):
        code, _, err = run(["find-transcendental", "builtin:parabola", "--target", "2"], capsys)
        assert code == 1 and "dimension" in err

    def test_simulate_threads(self, capsys):
        arts = []
        for t in ("1", "3"):
            code, art, _ = run_json(["simulate", "--group", "zd:2", "--ns", "2,4", "--samples", "200000",
                                     "--threads", t], capsys)
            arts.append(art["result"])
        assert arts[0] == arts[1]

    def test_fit(self, tmp_path, capsys):
        path = tmp_path / "d.csv"
        lines = ["n,p_lower,p_upper"] + [f"{n},{math.exp(-n ** 0.5)},{math.exp(-n ** 0.5)}"
                                         for n in range(64, 2049, 32)]
        path.write_text("\n".join(lines) + "\n")
        code, art, _ = run_json(["fit", "--input", str(path), "--bootstrap", "10"], capsys)
        assert code == 0 and abs(art["result"]["alpha"] - 0.5) < 1e-6

    def test_fit_reads_simulation_csv(self, tmp_path, capsys):
        path = tmp_path / "d.csv"
        lines = ["n,p,stderr"] + [f"{n},{n ** -1.5},0" for n in range(64, 1025, 64)]
        path.write_text("\n".join(lines) + "\n")
        code, art, _ = run_json(["fit", "--input", str(path), "--model", "power_law"], capsys)
        assert code == 0 and abs(art["result"]["alpha"] - 1.5) < 1e-6

    def test_folner_chain(self, tmp_path, capsys):
        couple = tmp_path / "c.json"
        code, art, _ = run_json(["folner-build", "--ring", "builtin:lamplighter", "--m", "2"], capsys)
        assert code == 0 and art["result"]["c0"] == "5/9"
        couple.write_text(json.dumps(art["result"]["couple"]))
        code, art, _ = run_json(["folner-verify", "--couple", str(couple), "--V", "C*2^(4*m+1)*(4*m+1)",
                                 "--param", "C=1"], capsys)
        assert code == 0 and art["result"]["passed"]
        code, art, _ = run_json(["folner-descend", "--couple", str(couple)], capsys)
        assert code == 0 and art["result"]["verification"]["passed"]

    def test_folner_verify_failure(self, tmp_path, capsys):
        _, art, _ = run_json(["folner-build", "--ring", "builtin:lamplighter", "--m", "1"], capsys)
        obj = art["result"]["couple"]
        obj["boxes"]["omega_prime"] = obj["boxes"]["omega"]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(obj))
        code, art, err = run_json(["folner-verify", "--couple", str(path)], capsys)
        assert code == 2 and art["exit_status"] == 2 and "verification failed" in err
        assert art["result"]["witnesses"]

    def test_noether(self, capsys):
        code, art, _ = run_json(["noether-count", "--ring", "builtin:parabola", "--ms", "1,2,3,4,5,6"], capsys)
        assert code == 0 and abs(art["result"]["growth"]["k_hat"] - 1) < 0.3

    def test_relations(self, capsys):
        code, art, _ = run_json(["verify-relations", "--group", "p-metabelian:d=2,p=3",
                                 "--relations", "[[w1,w2],[w3,w4]];[w1,w2]^3"], capsys)
        assert code == 0 and art["result"]["checked"] == 200

    def test_relations_violated(self, capsys):
        code, art, _ = run_json(["verify-relations", "--group", "free-metabelian:d=2",
                                 "--relations", "[w1,w2]^3"], capsys)
        assert code == 2 and not art["result"]["passed"]

    def test_pipeline(self, capsys):
        code, art, _ = run_json(["pipeline", "--group", "lamplighter:p=2,d=1", "--nexact", "256",
                                 "--mc-ns", "300", "--samples", "20000", "--min-n", "16"], capsys)
        res = art["result"]
        assert code == 0 and res["k"] == 1 and res["verdict"] == "consistent"
        assert abs(res["alpha_hat"] - 1 / 3) < 0.08


class TestInputErrors:
    @pytest.mark.parametrize("argv", [
        ["simulate", "--group", "lamplighter:p=2,d=1", "--ns", "2", "--samples", "0"],
        ["simulate", "--group", "klein-bottle:d=1", "--ns", "2", "--samples", "10"],
        ["simulate", "--group", "zd:1", "--ns", "two", "--samples", "10"],
        ["krull-dim", "/no/such/file.mod"],
        ["exact-return", "--group", "zd:1", "--nmax", "-2"],
        ["exact-return", "--group", "zd:1"],
        ["bogus-command"],
        ["krull-dim", "builtin:lamplighter", "--threads", "0"],
        ["folner-verify", "--couple", "/no/such/couple.json"],
    ])
    def test_exit_one(self, argv, capsys):
        code, out, err = run(argv, capsys)
        assert code == 1 and err

    def test_malformed_presentation(self, tmp_path, capsys):
        path = tmp_path / "m.mod"
        path.write_text("ring char=2 d=1 gens=1\nX +* 1\n")
        code, _, err = run(["krull-dim", str(path)], capsys)
        assert code == 1 and "malformed" in err

    def test_budget(self, capsys):
        code, _, err = run(["folner-build", "--ring", "builtin:fp_plane", "--m", "4",
                            "--budget-elements", "10"], capsys)
        assert code == 1 and "budget" in err

    def test_distinct_diagnostics(self, capsys):
        errs = []
        for argv in (["simulate", "--group", "klein:d=1", "--ns", "2", "--samples", "1"],
                     ["krull-dim", "/no/such"],
                     ["folner-build", "--ring", "builtin:fp_plane", "--m", "4", "--budget-elements", "10"]):
            errs.append(run(argv, capsys)[2])
        assert len(set(errs)) == 3


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "krullwalk.cli", "krull-dim", "builtin:zwrz"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["krull_module"] == 2


def test_fit_reads_exported_csv(tmp_path, capsys):
    path = tmp_path / "ret.csv"
    code, _, _ = run(["exact-return", "--group", "zd:1", "--nmax", "64", "--format", "csv",
                      "--out", str(path)], capsys)
    assert code == 0 and path.read_text().startswith("#")
    code, art, _ = run_json(["fit", "--input", str(path), "--model", "power_law", "--min-n", "8"], capsys)
    assert code == 0 and abs(art["result"]["alpha"] - 0.5) < 0.05


def test_verify_exact_c0(tmp_path, capsys):
    couple = tmp_path / "c.json"
    run(["folner-build", "--ring", "builtin:lamplighter", "--m", "3", "--out", str(couple)], capsys)
    code, art, _ = run_json(["folner-verify", "--couple", str(couple), "--c0", "7/13"], capsys)
    assert code == 0 and art["result"]["c0_required"] == "7/13"
    code, _, err = run(["folner-verify", "--couple", str(couple), "--c0", "7/0"], capsys)
    assert code == 1 and "--c0" in err
