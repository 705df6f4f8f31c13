import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from vidmpc.cli import main
from vidmpc.containers import Role, load_share, load_tensor, save_tensor
from vidmpc.model import ModelSpec, toy_model
from vidmpc.preproc import budget_for
from vidmpc.sharing import reconstruct_all

from conftest import CODEC, free_port_run

SESSION = "cli-test-session"

# Records every path the process opens, then runs the CLI.
AUDIT_RUNNER = """
import atexit, json, os, sys
opened = []
def hook(event, args):
    if event == "open" and not isinstance(args[0], int):
        opened.append(os.fsdecode(os.fspath(args[0])))
sys.addaudithook(hook)
log = sys.argv[1]
atexit.register(lambda: open(log, "w").write(json.dumps(opened)))
from vidmpc.cli import main
code = main(sys.argv[2:])
sys.exit(code)
"""


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def toy(capsys, out, *extra):
    code, text, _ = cli(capsys, "toy", "--out", out, *extra)
    assert code == 0
    return [int(v) for v in text.strip().splitlines()[-1].split(":")[1].split(",")]


def test_toy_writes_inputs(tmp_path, capsys):
    idx = toy(capsys, tmp_path, "--frames", 5, "--selected", 3)
    assert len(idx) == 3 and all(1 <= i <= 5 for i in idx)
    model = ModelSpec.load(tmp_path / "model.json")
    assert load_tensor(tmp_path / "weights.mpct").shape == (model.n_params,)
    assert load_tensor(tmp_path / "video.mpct").shape == (5, 16, 16, 1)


def test_deal_video_roundtrip_and_determinism(tmp_path, capsys):
    video = np.random.default_rng(0).uniform(0, 1, (4, 2, 2, 1))
    save_tensor(tmp_path / "v.mpct", video)
    code, text, _ = cli(capsys, "deal-video", "--in", tmp_path / "v.mpct", "--out", tmp_path / "a", "--session", SESSION, "--seed", 7)
    assert code == 0
    paths = [Path(p) for p in text.split()]
    assert len(paths) == 3
    shares = [load_share(p, role=Role.VIDEO).share for p in paths]
    assert all(s.shape == (4, 2, 2, 1) for s in shares)
    np.testing.assert_array_equal(reconstruct_all(shares), CODEC.encode_array(video))
    cli(capsys, "deal-video", "--in", tmp_path / "v.mpct", "--out", tmp_path / "b", "--session", SESSION, "--seed", 7)
    for p in paths:
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_deal_refuses_overwrite(tmp_path, capsys):
    args = ("deal-selection", "--indices", "1", "--frames", 2, "--out", tmp_path, "--session", SESSION)
    assert cli(capsys, *args)[0] == 0
    code, _, err = cli(capsys, *args)
    assert code == 2 and "--force" in err
    assert cli(capsys, *args, "--force")[0] == 0


def test_deal_selection_rows(tmp_path, capsys):
    code, text, _ = cli(capsys, "deal-selection", "--indices", "2,4", "--frames", 4, "--out", tmp_path, "--session", SESSION)
    assert code == 0
    shares = [load_share(p, role=Role.SELECTION).share for p in text.split()]
    np.testing.assert_array_equal(reconstruct_all(shares), [[0, 1, 0, 0], [0, 0, 0, 1]])


@pytest.mark.parametrize("indices", ["0", "5", "2,x"])
def test_deal_selection_bad_indices(tmp_path, indices):
    res = run_cli("deal-selection", "--indices", indices, "--frames", 4, "--out", tmp_path, "--session", SESSION)
    assert res.returncode == 2
    assert not list(tmp_path.iterdir())


def test_deal_model_size_mismatch(tmp_path, capsys):
    toy(capsys, tmp_path)
    save_tensor(tmp_path / "short.mpct", np.zeros(10))
    code, _, err = cli(
        capsys, "deal-model", "--manifest", tmp_path / "model.json", "--weights", tmp_path / "short.mpct",
        "--out", tmp_path / "s", "--session", SESSION,
    )
    assert code == 2 and "manifest" in err


def test_malformed_container_exit_code(tmp_path, capsys):
    (tmp_path / "bad.mpct").write_bytes(b"junk")
    code, _, _ = cli(capsys, "deal-video", "--in", tmp_path / "bad.mpct", "--out", tmp_path / "s", "--session", SESSION)
    assert code == 4


def test_local_classify_matches_oracle(tmp_path, capsys):
    idx = toy(capsys, tmp_path, "--seed", 2, "--frames", 4, "--selected", 2)
    common = ("--video", tmp_path / "video.mpct", "--indices", ",".join(map(str, idx)),
              "--model", tmp_path / "model.json", "--weights", tmp_path / "weights.mpct", "--scores")
    code, secure, _ = cli(capsys, "classify", "--local", *common, "--emit-transcript", tmp_path / "t.json")
    assert code == 0
    code, plain, _ = cli(capsys, "oracle", *common)
    assert code == 0
    s_scores, s_label = secure.strip().splitlines()
    o_scores, o_label = plain.strip().splitlines()
    assert s_label == o_label
    np.testing.assert_allclose(json.loads(s_scores), json.loads(o_scores), atol=2e-3)
    transcript = json.loads((tmp_path / "t.json").read_text())
    assert transcript and all(len(e) == 4 for e in transcript)


def test_classify_requires_local(tmp_path, capsys):
    toy(capsys, tmp_path, "--demo")
    code, _, err = cli(capsys, "classify", "--video", tmp_path / "video.mpct", "--indices", "2,4",
                       "--model", tmp_path / "model.json", "--weights", tmp_path / "weights.mpct")
    assert code == 2 and "--local" in err


def test_demo_oracle_labels(tmp_path, capsys):
    toy(capsys, tmp_path, "--demo")
    common = ("--video", tmp_path / "video.mpct", "--model", tmp_path / "model.json", "--weights", tmp_path / "weights.mpct")
    assert cli(capsys, "oracle", "--indices", "2,4", *common)[1].strip() == "5"
    assert cli(capsys, "oracle", "--indices", "1,3", *common)[1].strip() == "2"
    assert cli(capsys, "oracle", "--float", "--indices", "2,4", *common)[1].strip() == "5"
    assert cli(capsys, "classify", "--local", "--indices", "2,4", *common)[1].strip() == "5"


def test_preproc_budget_matches_model(tmp_path, capsys):
    toy_model().save(tmp_path / "m.json")
    code, text, _ = cli(capsys, "preproc", "--budget-from", tmp_path / "m.json", "--frames", 3)
    assert code == 0
    assert json.loads(text) == budget_for(toy_model(), None, 3).to_dict()


def test_bench_reports_equal_party_traffic(capsys):
    code, text, _ = cli(capsys, "bench", "--model", "toy", "--frames", 1, "--video-frames", 2)
    assert code == 0
    header, row = text.strip().splitlines()
    assert "comm (GB)" in header and "time (s)" in header
    per = [float(t.split("=")[1]) for t in row.split() if t.startswith("P")]
    assert len(per) == 3 and per[0] > 0 and len(set(per)) == 1


def test_configs_share_keys_pairwise(tmp_path, capsys):
    code, _, _ = cli(capsys, "configs", "--out", tmp_path, "--base-port", 40000)
    assert code == 0
    cfg = {i: json.loads((tmp_path / f"party{i}.json").read_text()) for i in (1, 2, 3)}
    for i in (1, 2, 3):
        j = i % 3 + 1
        assert cfg[i]["keys"]["next"] == cfg[j]["keys"]["prev"]
        assert cfg[i]["listen"] == f"127.0.0.1:{40000 + i}"
        assert set(cfg[i]["peers"]) == {str(k) for k in (1, 2, 3) if k != i}


# ---------------------------------------------------------------- networked


def run_cli(*argv, timeout=120):
    return subprocess.run([sys.executable, "-m", "vidmpc", *map(str, argv)], capture_output=True, text=True, timeout=timeout)


@pytest.fixture
def deployment(tmp_path, capsys):
    """Owner inputs in owner/, public manifest and party material elsewhere."""
    owner, public = tmp_path / "owner", tmp_path / "public"
    idx = toy(capsys, owner, "--seed", 5, "--frames", 4, "--selected", 2)
    public.mkdir()
    (public / "model.json").write_text((owner / "model.json").read_text())
    shares = tmp_path / "shares"
    sel = ",".join(map(str, idx))
    assert cli(capsys, "deal-video", "--in", owner / "video.mpct", "--out", shares, "--session", SESSION)[0] == 0
    assert cli(capsys, "deal-model", "--manifest", public / "model.json", "--weights", owner / "weights.mpct",
               "--out", shares, "--session", SESSION)[0] == 0
    assert cli(capsys, "deal-selection", "--indices", sel, "--frames", 4, "--out", shares, "--session", SESSION)[0] == 0
    assert cli(capsys, "preproc", "--budget-from", public / "model.json", "--frames", 2,
               "--out", tmp_path / "preproc", "--session", SESSION)[0] == 0
    base = free_port_run()
    assert cli(capsys, "configs", "--out", tmp_path / "cfg", "--base-port", base, "--manifest", public / "model.json",
               "--shares", shares, "--preproc", tmp_path / "preproc", "--output", tmp_path / "out", "--timeout", 60)[0] == 0
    code, label, _ = cli(capsys, "oracle", "--video", owner / "video.mpct", "--indices", sel,
                         "--model", public / "model.json", "--weights", owner / "weights.mpct")
    assert code == 0
    return tmp_path, int(label)


def test_networked_parties_never_open_plaintext(deployment):
    root, want = deployment
    (root / "runner.py").write_text(AUDIT_RUNNER)
    procs = [
        subprocess.Popen(
            [sys.executable, root / "runner.py", root / f"opened{i}.json", "party", "--config", root / "cfg" / f"party{i}.json",
             "--session", SESSION, "--emit-transcript", root / f"t{i}.json"],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
        )
        for i in (1, 2, 3)
    ]
    for p in procs:
        out, err = p.communicate(timeout=300)
        assert p.returncode == 0, err
    res = run_cli("reveal", "--shares", *(root / "out" / f"label.p{i}.mpct" for i in (1, 2, 3)), "--session", SESSION)
    assert res.returncode == 0, res.stderr
    assert int(res.stdout) == want

    owner = str(root / "owner")
    for i in (1, 2, 3):
        opened = json.loads((root / f"opened{i}.json").read_text())
        assert not [p for p in opened if p.startswith(owner)]
        assert str(root / "shares" / f"video.p{i}.mpct") in opened
        other = [f"p{j}.mpct" for j in (1, 2, 3) if j != i]
        assert not [p for p in opened if str(root / "shares") in p and any(p.endswith(o) for o in other)]
        assert json.loads((root / f"t{i}.json").read_text())
    sizes = [sum(e[3] for e in json.loads((root / f"t{i}.json").read_text()) if e[0] == i) for i in (1, 2, 3)]
    assert len(set(sizes)) == 1


def test_absent_party_aborts_with_exit_3(deployment):
    root, _ = deployment
    res = run_cli("party", "--config", root / "cfg" / "party1.json", "--session", SESSION, "--timeout", 1.5)
    assert res.returncode == 3, res.stderr
    assert not (root / "out" / "label.p1.mpct").exists()


def test_wrong_session_share_rejected(deployment):
    root, _ = deployment
    res = run_cli("party", "--config", root / "cfg" / "party1.json", "--session", "another-session", "--timeout", 1)
    assert res.returncode == 4
