import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from threestage.cli import main
from threestage.config import ConfigError, load_config, parse_config
from threestage.simulation import TruthPoint, normal_stream

GOLDEN = {
    "hypothesis": {"mu0": 0.0, "mu1": 0.5},
    "box": {"mu_lo": -1.0, "mu_hi": 1.5, "var_lo": 0.5, "var_hi": 2.0, "eps": 0.25},
    "design": {"a0": 5.0, "a1": 5.0},
    "truth": {"points": [{"mu": -0.5, "var": 1.0}, {"mu": 0.25, "var": 1.25}, {"mu": 1.0, "var": 1.0}]},
    "plan": {"reps": 200, "seed": 11},
    "lemma": {"k0": [20, 40], "b": [1.0], "truth": {"mu": 1.0, "var": 1.0}},
}


def write_config(tmp_path, data=None, **overrides):
    data = yaml.safe_load(yaml.safe_dump(data or GOLDEN))
    for dotted, value in overrides.items():
        node = data
        *head, last = dotted.split(".")
        for key in head:
            node = node.setdefault(key, {})
        node[last] = value
    path = tmp_path / "job.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_design_symmetric_midpoint(tmp_path, capsys):
    code, out, _ = run(capsys, "design", "--config", write_config(tmp_path))
    assert code == 0
    header, row = out.strip().split("\n")
    rec = dict(zip(header.split(","), row.split(",")))
    assert rec["mu2"] == "0.25"
    assert (rec["m"], rec["n1"]) == ("325", "2")
    assert float(rec["n_bar"]) == pytest.approx(324.97435735578982, rel=1e-15)
    assert len(rec["n_bar"].replace(".", "")) == 17


def test_design_asymmetric_matches_library(tmp_path, capsys):
    from threestage import DesignInputs, HypothesisSpec, ParameterBox, make_design
    path = write_config(tmp_path, **{"design.a0": 7.0, "design.a1": 3.0})
    code, out, _ = run(capsys, "design", "--config", path, "--format", "json")
    rec = json.loads(out)[0]
    d = make_design(DesignInputs(7.0, 3.0, HypothesisSpec(0.0, 0.5), ParameterBox(-1, 1.5, 0.5, 2.0, 0.25)))
    assert rec["mu2"] == d.mu2 and rec["n_bar"] == d.n_bar and rec["m"] == d.m_cap


@pytest.mark.parametrize("field, value, fragment", [
    ("design.c_frac", 0.0, "design.c_frac"),
    ("box.eps", 0.6, "box"),
    ("plan.reps", 0, "plan.reps"),
    ("hypothesis.mu1", -0.2, "hypothesis"),
])
def test_invalid_config_exit_2(tmp_path, capsys, field, value, fragment):
    code, _, err = run(capsys, "design", "--config", write_config(tmp_path, **{field: value}))
    assert code == 2
    assert fragment in err


def test_box_must_bracket_hypotheses():
    with pytest.raises(ConfigError, match="mu_lo"):
        parse_config({**GOLDEN, "box": {**GOLDEN["box"], "mu_lo": 0.2}})


def test_simulate_rows_and_determinism(tmp_path, capsys):
    path = write_config(tmp_path)
    code, first, _ = run(capsys, "simulate", "--config", path)
    assert code == 0
    assert len(first.strip().split("\n")) == 1 + 3 * 2
    _, second, _ = run(capsys, "simulate", "--config", path)
    assert first == second
    _, other, _ = run(capsys, "simulate", "--config", path, "--seed", "12")
    assert other != first


def test_simulate_writes_artifacts_and_roundtrips(tmp_path, capsys):
    path = write_config(tmp_path)
    out = tmp_path / "out"
    assert run(capsys, "simulate", "--config", path, "--out", out)[0] == 0
    csv_bytes = (out / "simulate.csv").read_bytes()
    assert b"\r" not in csv_bytes
    effective = yaml.safe_load((out / "effective_config.yaml").read_text())
    assert effective["design"]["c_frac"] == 0.5 and effective["design"]["b_const"] == 1.0
    assert effective["lemma"]["horizon"] == 4 * 325
    out2 = tmp_path / "out2"
    again = write_config(tmp_path, effective, **{"output.dir": str(out2)})
    assert run(capsys, "simulate", "--config", again)[0] == 0
    assert (out2 / "simulate.csv").read_bytes() == csv_bytes


def test_compare_table(tmp_path, capsys):
    code, out, _ = run(capsys, "compare", "--config", write_config(tmp_path, **{"plan.reps": 300}),
                       "--format", "json")
    assert code == 0
    rows = json.loads(out)
    from threestage import make_design, oracle_sample_size
    cfg = load_config(write_config(tmp_path))
    d = cfg.make_design()
    assert len(rows) == 3
    for row in rows:
        assert row["oracle_n"] == oracle_sample_size(d, TruthPoint(row["mu"], row["var"]))
        combined = (row["se_three_stage"] ** 2 + row["se_fully_sequential"] ** 2) ** 0.5
        assert row["mean_n_fully_sequential"] <= row["mean_n_three_stage"] + 3 * combined


def test_lemma_check(tmp_path, capsys):
    code, out, _ = run(capsys, "lemma-check", "--config", write_config(tmp_path), "--format", "json")
    assert code == 0
    rows = json.loads(out)
    assert [r["k0"] for r in rows] == [20, 40]
    assert rows[0]["rate"] <= rows[1]["rate"]
    for r in rows:
        assert r["scaled_miss"] == pytest.approx((1 - r["rate"]) * r["k0"])


def test_run_file_constant_data_exit_4(tmp_path, capsys):
    data = tmp_path / "x.txt"
    data.write_text("0.25\n" * 325)
    path = write_config(tmp_path, **{"run.data_file": str(data)})
    assert run(capsys, "run-file", "--config", path)[0] == 4


def test_run_file_parse_error_exit_2(tmp_path, capsys):
    data = tmp_path / "x.txt"
    data.write_text("0.25\n1.0\noops\n")
    code, _, err = run(capsys, "run-file", "--config", write_config(tmp_path, **{"run.data_file": str(data)}))
    assert code == 2 and ":3:" in err


def test_run_file_insufficient_exit_4(tmp_path, capsys):
    data = tmp_path / "x.txt"
    data.write_text("\n".join(str(v) for v in np.random.default_rng(0).normal(0.25, 1.4, 30)))
    assert run(capsys, "run-file", "--config", write_config(tmp_path, **{"run.data_file": str(data)}))[0] == 4


def test_run_file_matches_synthetic_stream(tmp_path, capsys):
    from threestage import run_three_stage
    cfg = load_config(write_config(tmp_path))
    d = cfg.make_design()
    t = TruthPoint(0.9, 1.0)
    values = normal_stream(3, 0, t).read(d.m_cap)
    data = tmp_path / "x.txt"
    data.write_text("".join(f"{float(v)!r}\r\n" for v in values))
    code, out, _ = run(capsys, "run-file", "--config", write_config(tmp_path, **{"run.data_file": str(data)}),
                       "--format", "json")
    assert code == 0
    rec = json.loads(out)
    ref = run_three_stage(d, normal_stream(3, 0, t), trace=True)
    assert rec["decision"] == ref.decision.value and rec["total_n"] == ref.total_n
    assert len(rec["trace"]) == len(ref.trace)


def test_run_file_strong_signal_stage_one(tmp_path, capsys):
    data = tmp_path / "x.txt"
    data.write_text("0.9\n1.6\n2.3\n" + "0\n" * 400)
    path = write_config(tmp_path, **{"run.data_file": str(data), "design.a0": 3.0, "design.a1": 3.0,
                                     "design.c_frac": 1.0})
    code, out, _ = run(capsys, "run-file", "--config", path)
    assert code == 0
    assert "# decision=RejectH0" in out and "# stage=Stage1" in out and "# total_n=3" in out


def test_missing_config_file(tmp_path, capsys):
    assert run(capsys, "design", "--config", tmp_path / "nope.yaml")[0] == 2
