import hashlib
import json
import subprocess
import sys

import pytest

from bdgke import cli
from bdgke.cli import (
    EXIT_FAIL,
    EXIT_MISMATCH,
    EXIT_OK,
    EXIT_STUCK,
    EXIT_USAGE,
    execute,
    exit_code,
    main,
    parse_range,
    replay,
    sweep,
)
from bdgke.errors import ConfigurationError, StuckRunError
from bdgke.group import dump_params, schnorr_group
from bdgke.scenario import RunReport, ScenarioConfig, transcript_text, write_transcript


def run_main(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_honest_example(capsys):
    code, out, _ = run_main(capsys, "--mode", "honest", "--n", "4", "--group", "toy",
                            "--seed", "7")
    report = json.loads(out)
    assert code == EXIT_OK
    assert report["agreement"] is True and len(report["keys"]) == 4


def test_attack_example(capsys):
    code, out, _ = run_main(capsys, "--mode", "attack", "--n", "5", "--victim", "2",
                            "--seed", "7", "--check-product")
    report = json.loads(out)
    assert code == EXIT_OK
    assert report["agreement"] is True and len(report["keys"]) == 6
    assert report["victim_detects"] is False


@pytest.mark.parametrize("seed", [0, 7, 19])
def test_attack_without_evasion_example(capsys, seed):
    code, out, _ = run_main(capsys, "--mode", "attack", "--n", "5", "--victim", "2",
                            "--seed", str(seed), "--no-evasion", "--check-product")
    report = json.loads(out)
    assert report["agreement"] is True
    assert report["victim_detects"] is True
    assert code == EXIT_OK


@pytest.mark.parametrize("argv", [
    ["--mode", "attack", "--n", "5"],
    ["--mode", "attack", "--n", "5", "--victim", "6"],
    ["--mode", "honest", "--n", "2"],
    ["--mode", "honest", "--group", "curve25519"],
    ["--mode", "honest", "--group", "file:/nonexistent/params.json"],
    ["--mode", "honest", "--seed", str(1 << 64)],
    ["--mode", "sideways"],
])
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as err:
        code = main(argv)
        raise SystemExit(code)
    assert err.value.code == EXIT_USAGE


def test_stuck_run_exit_code(capsys, monkeypatch):
    def stuck(config):
        raise StuckRunError(3, [1, 2], "key computation")

    monkeypatch.setattr(cli, "run", stuck)
    code, _, err = run_main(capsys, "--mode", "honest", "--n", "4")
    assert code == EXIT_STUCK
    assert "party 3" in err


def test_file_group(capsys, tmp_path):
    import random

    params = schnorr_group(256, random.Random(77))
    path = tmp_path / "group.json"
    dump_params(params, path)
    code, out, _ = run_main(capsys, "--mode", "attack", "--n", "4", "--victim", "4",
                            "--group", f"file:{path}", "--check-product")
    report = json.loads(out)
    assert code == EXIT_OK
    assert report["params_digest"] == params.digest()


# ---- reports and exit codes ----

def test_report_json_roundtrip():
    for cfg in (ScenarioConfig("honest", 5, group="toy", seed=1, check_product=True),
                ScenarioConfig("attack", 6, victim=6, group="toy", seed=2, evasion=False,
                               check_product=True)):
        report = execute(cfg).report
        assert RunReport.from_json(report.to_json()) == report


def _report(**kw):
    base = dict(mode="attack", n=3, victim=1, group="toy", params_digest="x", seed=0,
                keys={"1": "a", "2": "a", "3": "a", "A": "a"}, agreement=True,
                victim_detects=False, evasion=True)
    base.update(kw)
    return RunReport(**base)


def test_exit_code_is_function_of_report():
    assert exit_code(_report()) == EXIT_OK
    assert exit_code(_report(agreement=False)) == EXIT_FAIL
    assert exit_code(_report(victim_detects=True)) == EXIT_FAIL
    assert exit_code(_report(victim_detects=True, evasion=False)) == EXIT_OK
    assert exit_code(_report(victim_detects=None)) == EXIT_OK
    assert exit_code(_report(keys={"1": "a", "2": "a", "3": "a"})) == EXIT_FAIL
    assert exit_code(_report(mode="honest", victim=None, victim_detects=None,
                             keys={"1": "a", "2": "a", "3": "a"})) == EXIT_OK


# ---- transcripts and replay ----

def test_out_writes_transcript(capsys, tmp_path):
    path = tmp_path / "t.jsonl"
    code, _, _ = run_main(capsys, "--mode", "attack", "--n", "4", "--victim", "1",
                          "--group", "toy", "--seed", "3", "--out", str(path))
    assert code == EXIT_OK
    lines = path.read_text().splitlines()
    header = json.loads(lines[0])
    assert header["config"]["victim"] == 1 and header["params"] == {"p": "17", "q": "b",
                                                                    "g": "4"}
    event = json.loads(lines[1])
    assert list(event) == ["seq", "true_origin", "claimed_sender", "destination", "round",
                           "payload", "original", "action", "tap"]


def test_replay_match(capsys, tmp_path):
    path = tmp_path / "t.jsonl"
    run_main(capsys, "--mode", "attack", "--n", "6", "--victim", "5", "--seed", "9",
             "--out", str(path))
    assert replay(path).match
    code, out, _ = run_main(capsys, "--replay", str(path))
    assert code == EXIT_OK and "match" in out


def test_replay_detects_flipped_payload(capsys, tmp_path):
    path = tmp_path / "t.jsonl"
    write_transcript(execute(ScenarioConfig("attack", 5, victim=2, group="toy", seed=4)), path)
    lines = path.read_text().splitlines()
    target = 9
    event = json.loads(lines[target])
    flipped = format(int(event["payload"], 16) ^ 1, "x")
    lines[target] = lines[target].replace(f'"payload":"{event["payload"]}"',
                                          f'"payload":"{flipped}"')
    path.write_text("\n".join(lines) + "\n")
    verdict = replay(path)
    assert not verdict.match and verdict.line == target
    code, out, _ = run_main(capsys, "--replay", str(path))
    assert code == EXIT_MISMATCH
    assert f"event {target}" in out


def test_replay_detects_truncation(tmp_path):
    path = tmp_path / "t.jsonl"
    write_transcript(execute(ScenarioConfig("honest", 3, group="toy", seed=4)), path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    verdict = replay(path)
    assert not verdict.match and verdict.line == 12 and verdict.expected is None


def test_replay_bad_file(capsys, tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    code, _, _ = run_main(capsys, "--replay", str(path))
    assert code == EXIT_USAGE


def test_transcripts_pinned_across_builds():
    """Seeded streams and serialization must not drift between builds."""
    pinned = {
        ScenarioConfig("attack", 5, victim=2, group="toy", seed=7, check_product=True):
            "fe125d979e31558ac9207f09417da9ebd0901f86cb6791e18b7cfa2617f6aa22",
        ScenarioConfig("honest", 4, group="schnorr-256", seed=123):
            "990d9b318e66138ed076081aa5f96b427cb315b7d3881ca9231d940f03c70e03",
    }
    for cfg, digest in pinned.items():
        assert hashlib.sha256(transcript_text(execute(cfg)).encode()).hexdigest() == digest


# ---- sweep ----

def test_parse_range():
    assert parse_range("3-5") == [3, 4, 5]
    assert parse_range("1,4,7-8") == [1, 4, 7, 8]
    assert parse_range("") == []


def test_sweep_small_all_pass():
    table = sweep([3, 4, 5], range(5), ["honest", "attack"], group="toy")
    assert table[(3, "honest")] == (5, 5)
    assert table[(5, "attack")] == (25, 25)


def test_sweep_single_cell_n3_attack():
    assert sweep([3], [0], ["attack"], group="toy") == {(3, "attack"): (3, 3)}


def test_sweep_parallel_matches_serial():
    serial = sweep([3, 4], range(3), ["attack"], group="toy")
    assert sweep([3, 4], range(3), ["attack"], group="toy", jobs=2) == serial


def test_sweep_empty_seeds():
    with pytest.raises(ConfigurationError):
        sweep([3], [], ["honest"])


def test_sweep_cli(capsys):
    code, out, _ = run_main(capsys, "--sweep", "--n-range", "3-4", "--seeds", "0-2",
                            "--group", "toy")
    assert code == EXIT_OK
    assert "PASS" in out and "FAIL" not in out
    code, _, err = run_main(capsys, "--sweep", "--seeds", "")
    assert code == EXIT_USAGE
    code, _, _ = run_main(capsys, "--sweep", "--modes", "honest,bogus")
    assert code == EXIT_USAGE


def test_sweep_cli_failure_exit(capsys, monkeypatch):
    monkeypatch.setattr(cli, "sweep", lambda *a, **k: {(3, "honest"): (1, 2)})
    code, out, _ = run_main(capsys, "--sweep", "--n-range", "3", "--seeds", "0-1",
                            "--modes", "honest")
    assert code == EXIT_FAIL and "FAIL" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bdgke", "--mode", "honest", "--n", "3",
                           "--group", "toy"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["agreement"] is True
