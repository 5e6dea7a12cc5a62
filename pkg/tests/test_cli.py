import json

import pytest

from blindsso.cli import main
from blindsso.transcript import LoginTranscript


class TestCli:
    def test_scenario_writes_transcripts_and_exits_zero(self, tmp_path, capsys):
        out = tmp_path / "transcripts.jsonl"
        code = main([
            "scenario", "--users", "1", "--rps", "1", "--logins", "2",
            "--seed", "6", "--transcripts", str(out),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        t = LoginTranscript.from_json_line(lines[0])
        assert t.account
        assert "[PASS]" in capsys.readouterr().out

    def test_security_suite_exit_zero(self, capsys):
        assert main(["security", "--seed", "2"]) == 0
        assert "[PASS]" in capsys.readouterr().out

    def test_privacy_json_output(self, capsys):
        code = main([
            "privacy", "--users", "1", "--rps", "2", "--logins", "2",
            "--seed", "8", "--out", "json",
        ])
        assert code == 0
        out = capsys.readouterr().out
        payload = json.loads(out[out.index("{"):])
        assert payload["issuer-unlinkability"]["passed"] is True
        assert payload["rp-linkage-structure"]["passed"] is True

    def test_bench_json_output(self, capsys):
        code = main(["bench", "--group", "toy", "--logins", "5", "--seed", "9"])
        assert code == 0
        assert "prepare_request_ms" in capsys.readouterr().out

    def test_unknown_command_rejected(self):
        with pytest.raises(SystemExit):
            main(["frobnicate"])
