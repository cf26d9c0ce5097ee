import csv
import json

import numpy as np
import pytest

from lgflat.cli import derive_seed, main


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_crosstalk_run(tmp_path, capsys):
    cfg = write(tmp_path, "[model]\nmethod = if\nbeta = 5.5\n[crosstalk]\nfamily = radial\np_max = 3\n")
    out = tmp_path / "o"
    assert main(["crosstalk", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.reader(open(out / "crosstalk.csv")))
    assert rows[0] == ["label", "l0p0", "l0p1", "l0p2", "l0p3"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["model"]["beta"] == 5.5
    assert man["config"]["crosstalk"]["p_max"] == 3
    assert "visibility=" in capsys.readouterr().out


def test_crosstalk_nonconverged_exit_3(tmp_path):
    cfg = write(tmp_path, "[grid]\nn_radial = 16\nn_azimuthal = 8\nr_max_factor = 1.5\n[crosstalk]\nfamily = modes\nmodes = l0p7 l0p0\nrel_tol = 1e-9\n")
    assert main(["crosstalk", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


@pytest.mark.parametrize("text,needle", [
    ("[model]\nmethod = xx\n", "run.ini:2: [model] method"),
    ("[model]\n\nbeta = abc\n", "run.ini:3: [model] beta"),
    ("[crosstalk]\nbogus = 1\n", "run.ini:2: [crosstalk] bogus: unknown key"),
    ("[model]\nmethod = pf\nbeta = 3\n", "[model] beta"),
    ("[grid]\nn_azimuthal = 9\n", "[grid] n_azimuthal: must be even"),
])
def test_config_errors_exit_2(tmp_path, capsys, text, needle):
    cfg = write(tmp_path, text)
    assert main(["crosstalk", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert needle in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["crosstalk", "--config", str(tmp_path / "nope.ini")]) == 2


def test_bad_seed(tmp_path):
    assert main(["mub-check", "--seed", "-1", "--out", str(tmp_path)]) == 2


def test_tradeoff(tmp_path):
    cfg = write(tmp_path, "[tradeoff]\nd_min = 2\nd_max = 3\ntargets = 0.9, 0.95\n")
    assert main(["tradeoff", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "o" / "tradeoff.csv")))
    assert len(rows) == 4 and all(float(r["visibility"]) >= float(r["target_visibility"]) for r in rows)


def _matrix(tmp_path, n=10, seed=0):
    rng = np.random.default_rng(seed)
    C = rng.uniform(0, 0.05, (n, n))
    C[np.diag_indices(n)] = rng.uniform(0.5, 1, n)
    path = tmp_path / "m.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        labels = [f"l{i}p0" for i in range(n)]
        w.writerow(["label", *labels])
        for lab, row in zip(labels, C):
            w.writerow([lab, *(repr(float(x)) for x in row)])
    return path


def test_subspace_outputs_and_reproducibility(tmp_path):
    m = _matrix(tmp_path)
    cfg = write(tmp_path, f"[subspace]\nmatrix = {m}\nd_min = 2\nd_max = 5\nn_samples = 50\ngenerations = 10\n")
    for name in ("a", "b"):
        assert main(["subspace", "--config", cfg, "--seed", "42", "--out", str(tmp_path / name)]) == 0
    for f in ("subspace.csv", "best_subsets.csv", "ga_trace.csv", "best_subsets.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a" / "subspace.csv")))
    assert [int(r["d"]) for r in rows] == [2, 3, 4, 5]
    assert all(float(r["ga_best"]) >= float(r["random_max"]) - 1e-12 for r in rows)


def test_subspace_needs_matrix(tmp_path, capsys):
    cfg = write(tmp_path, "[subspace]\nd_max = 3\n")
    assert main(["subspace", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "[subspace] matrix" in capsys.readouterr().err


def test_qst_exact(tmp_path):
    cfg = write(tmp_path, "[qst]\nsupport = radial:3\nmethod = exact\n")
    assert main(["qst", "--config", cfg, "--seed", "5", "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "fidelity.json").read_text())
    assert rep["fidelity"] == pytest.approx(1.0, abs=1e-10)
    # the saved truth can be fed back in
    cfg2 = write(tmp_path, f"[qst]\nstate = {tmp_path / 'o' / 'truth_state.json'}\nmethod = if\nbeta = 12\n", "b.ini")
    assert main(["qst", "--config", cfg2, "--out", str(tmp_path / "p")]) == 0
    assert json.loads((tmp_path / "p" / "fidelity.json").read_text())["fidelity"] > 0.99


def test_qst_non_prime(tmp_path, capsys):
    cfg = write(tmp_path, "[qst]\nsupport = radial:4\n")
    assert main(["qst", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "not prime" in capsys.readouterr().err


def test_mub_check(tmp_path):
    assert main(["mub-check", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "mub_check.csv")))
    assert [int(r["d"]) for r in rows] == [2, 3, 5, 7, 11, 13, 17, 19]
    assert all(r["status"] == "pass" for r in rows)


def test_derive_seed():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert 0 <= derive_seed(2**64 - 1, 9) < 2**64
