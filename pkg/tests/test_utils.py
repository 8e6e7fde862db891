import json

import pytest

from minusface.errors import FormatError, InvalidArgumentError
from minusface.models import ImageScore, InvariantResult, RecoveryReport
from minusface.utils.parsing import load_config_file, parse_seed, split_overrides
from minusface.utils.report_formatter import (
    comparison_rows,
    format_comparison,
    format_invariant_table,
    format_key_values,
    format_summary,
    format_table,
    format_value,
    recovery_csv,
    recovery_summary,
)


@pytest.mark.parametrize("value, expected", [
    (0, 0),
    ("42", 42),
    ("0x2A", 42),
    ("0XFFFFFFFFFFFFFFFF", 2 ** 64 - 1),
    (" 1_000 ", 1000),
])
def test_parse_seed(value, expected):
    assert parse_seed(value) == expected


@pytest.mark.parametrize("value", [True, "-1", str(2 ** 64), "0xZZ", "1.5", ""])
def test_parse_seed_rejects(value):
    with pytest.raises(InvalidArgumentError):
        parse_seed(value)


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return path


def test_load_config_file(tmp_path):
    path = write_json(tmp_path / "cfg.json", {"epochs": 3, "lr_drop_epochs": [1, 2]})
    assert load_config_file(path) == {"epochs": 3, "lr_drop_epochs": [1, 2]}


def test_config_file_errors(tmp_path):
    with pytest.raises(FormatError, match="no such file"):
        load_config_file(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{epochs: 3")
    with pytest.raises(FormatError, match="invalid JSON"):
        load_config_file(tmp_path / "bad.json")
    with pytest.raises(FormatError, match="JSON object"):
        load_config_file(write_json(tmp_path / "list.json", [1, 2]))
    with pytest.raises(FormatError, match="nested"):
        load_config_file(write_json(tmp_path / "nested.json", {"seeds": {"init": 1}}))


def test_split_overrides_routes_keys():
    train, protector, attack = split_overrides({
        "epochs": 4,
        "alpha": 2.0,
        "mapping": "dwt",
        "init_seed": "0x10",
        "shuffle_seed": 9,
        "attack_epochs": 7,
        "patience": 2,
        "fixed_seed": "5",
    })
    assert train == {"epochs": 4, "seeds": {"init": 16, "shuffle": 9}}
    assert protector["alpha"] == 2.0
    assert protector["mapping"].kind.value == "haar2"
    assert attack == {"init_seed": 16, "epochs": 7, "patience": 2, "fixed_seed": 5}


def test_split_overrides_rejects_unknown():
    with pytest.raises(InvalidArgumentError, match="colour"):
        split_overrides({"colour": "blue"})
    with pytest.raises(InvalidArgumentError):
        split_overrides({"mapping": "jpeg"})


def test_format_value():
    assert format_value(0.123456) == "0.1235"
    assert format_value(True) == "true"
    assert format_value(None) == "-"
    assert format_value(3) == "3"


def test_key_values_alignment():
    text = format_key_values({"a": 1, "long_key": 0.5}, title="Run")
    assert text.splitlines() == ["Run", "---", "a" + " " * 7 + ": 1", "long_key: 0.5000"]


def test_table_widths():
    lines = format_table(("x", "name"), [(1, "alpha"), (22, "b")]).splitlines()
    assert lines[0] == "x   name "
    assert lines[1] == "--  -----"
    assert lines[2] == "1   alpha"


def test_invariant_table():
    results = [
        InvariantResult(name="codec.roundtrip", passed=True, metrics={"max_error": 1e-7}),
        InvariantResult(name="perturb.inverse", passed=False),
    ]
    text = format_invariant_table(results)
    rows = {line.split()[1]: line.split()[0] for line in text.splitlines()[2:4]}
    assert rows == {"codec.roundtrip": "PASS", "perturb.inverse": "FAIL"}
    assert text.rstrip().endswith("1/2 passed")


def _report(floor=None):
    return RecoveryReport(
        count=2, ssim_mean=0.4, ssim_std=0.1, psnr_mean=12.0, psnr_std=1.0, floor_ssim=floor,
        per_image=[ImageScore(index=0, ssim=0.3, psnr=11.0), ImageScore(index=1, ssim=0.5, psnr=13.0)],
    )


def test_recovery_csv():
    assert recovery_csv(_report()).splitlines() == [
        "index,ssim,psnr", "0,0.300000,11.0000", "1,0.500000,13.0000"]


def test_recovery_summary_floor():
    assert "attack_floor_ssim" not in recovery_summary(_report(), prefix="attack_")
    values = recovery_summary(_report(floor=0.25), prefix="attack_")
    assert values["attack_ssim_above_floor"] == pytest.approx(0.15)


def test_summary_skips_empty_sections():
    text = format_summary({"Stage 1": {"epochs": 2}, "Empty": {}})
    assert "Stage 1" in text and "Empty" not in text


@pytest.fixture
def run_reports():
    return {
        "desk/stage1_report.txt": {"mean_residue_l1": "0.0300", "mean_image_l1": "0.4500", "r_accuracy": "0.9500"},
        "desk/stage2_report.txt": {"protected_accuracy": "0.9000", "seed_consistency": "0.9800",
                                   "baseline_accuracy": "0.9300"},
        "desk/attack_report.txt": {"mode": "random", "ssim_mean": "0.3000", "psnr_mean": "14.0000",
                                   "floor_ssim": "0.2500"},
        "desk/identity_report.txt": {"mode": "identity", "ssim_mean": "0.9700", "psnr_mean": "31.0000",
                                     "floor_ssim": "0.2500"},
        "ablate/r_prime_report.txt": {"ablation_r_prime_accuracy": "0.5500"},
        "ablate/mask_report.txt": {"ablation_mask_protected_accuracy": "0.8000"},
        "ablate/nosub_report.txt": {"ablation_no_subtraction_protected_accuracy": "0.9100",
                                    "ablation_no_subtraction_attack_ssim": "0.6000",
                                    "ablation_no_subtraction_attack_floor_ssim": "0.2500"},
    }


def test_comparison_utility_rows(run_reports):
    rows = {(run, label): rest for run, label, *rest in comparison_rows(run_reports)["utility"]}
    assert rows[("desk", "f on X (baseline)")] == [pytest.approx(0.93), None, None]
    assert rows[("desk", "f on r")][0] == pytest.approx(0.95)
    assert rows[("desk", "f_p on X_p")] == [pytest.approx(0.90), pytest.approx(-0.03), pytest.approx(0.98)]
    assert rows[("ablate", "f on R'")] == [pytest.approx(0.55), None, None]
    assert rows[("ablate", "f_p on X_p, mask")][0] == pytest.approx(0.80)
    assert ("desk", "f on R'") not in rows


def test_comparison_recovery_and_residue_rows(run_reports):
    rows = comparison_rows(run_reports)
    recovery = {label: rest for _, label, *rest in rows["recovery"]}
    assert recovery["random attacker"] == pytest.approx([0.30, 14.0, 0.25, 0.05])
    assert recovery["identity attacker"][0] == pytest.approx(0.97)
    assert recovery["random attacker, no subtraction"][0] == pytest.approx(0.60)
    assert recovery["random attacker, no subtraction"][1] is None
    assert rows["residue"] == [("desk", pytest.approx(0.03), pytest.approx(0.45))]


def test_format_comparison_tables(run_reports):
    text = format_comparison(run_reports)
    lines = text.splitlines()
    for title, headers in (
        ("Recognition accuracy", ["run", "recognizer", "accuracy", "vs_baseline", "seed_consistency"]),
        ("Recovery attacks", ["run", "attacker", "ssim", "psnr", "floor_ssim", "above_floor"]),
        ("Blank residue", ["run", "mean_residue_l1", "mean_image_l1"]),
    ):
        at = lines.index(title)
        assert lines[at + 2].split() == headers
    assert "-0.0300" in text and "0.9800" in text
    assert format_comparison({"x/notes_report.txt": {"epochs": "3"}}) == ""
