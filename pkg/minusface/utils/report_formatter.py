"""
Plain-text formatting for reports, invariant tables and recovery scores.
"""

from pathlib import PurePosixPath
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from minusface.models import InvariantResult, RecoveryReport


def format_value(value) -> str:
    """Floats to 4 decimals, everything else via str()."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.4f}"
    if value is None:
        return "-"
    return str(value)


def format_key_values(values: Mapping[str, object], title: str = "") -> str:
    """
    Align 'key: value' lines under an optional title.

    Args:
        values: Ordered mapping of report entries
        title: Optional heading line

    Returns:
        Multi-line string ending in a newline
    """
    lines = []
    if title:
        lines += [title, "-" * len(title)]
    width = max((len(k) for k in values), default=0)
    lines += [f"{key.ljust(width)}: {format_value(value)}" for key, value in values.items()]
    return "\n".join(lines) + "\n"


def format_table(headers: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    """Fixed-width text table with a header rule."""
    cells = [[format_value(c) for c in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def format_invariant_table(results: List[InvariantResult]) -> str:
    """PASS/FAIL table of invariant results plus a totals line."""
    rows = []
    for r in results:
        metrics = " ".join(f"{k}={v:.3g}" for k, v in r.metrics.items())
        rows.append(("PASS" if r.passed else "FAIL", r.name, metrics, r.detail))
    passed = sum(1 for r in results if r.passed)
    return format_table(("status", "property", "metrics", "detail"), rows) + f"\n{passed}/{len(results)} passed\n"


def recovery_csv(report: RecoveryReport) -> str:
    """Per-image SSIM/PSNR as CSV."""
    lines = ["index,ssim,psnr"]
    lines += [f"{s.index},{s.ssim:.6f},{s.psnr:.4f}" for s in report.per_image]
    return "\n".join(lines) + "\n"


def recovery_summary(report: RecoveryReport, prefix: str = "") -> Dict[str, object]:
    """Flatten a RecoveryReport into report entries."""
    values = {
        f"{prefix}count": report.count,
        f"{prefix}ssim_mean": report.ssim_mean,
        f"{prefix}ssim_std": report.ssim_std,
        f"{prefix}psnr_mean": report.psnr_mean,
        f"{prefix}psnr_std": report.psnr_std,
    }
    if report.floor_ssim is not None:
        values[f"{prefix}floor_ssim"] = report.floor_ssim
        values[f"{prefix}ssim_above_floor"] = report.ssim_mean - report.floor_ssim
    return values


def format_summary(sections: Mapping[str, Mapping[str, object]]) -> str:
    """Concatenate titled key-value sections."""
    return "\n".join(format_key_values(values, title) for title, values in sections.items() if values)


# ----------------------------------------------------------------------
# Run comparison
# ----------------------------------------------------------------------

# (row label, accuracy keys in lookup order, seed-consistency key)
UTILITY_ROWS = (
    ("f on X (baseline)", ("baseline_accuracy",), None),
    ("f on r", ("r_accuracy", "ablation_r_r_accuracy"), None),
    ("f on R'", ("ablation_r_prime_accuracy",), None),
    ("f_p on X_p", ("protected_accuracy",), "seed_consistency"),
    ("f_p on X_p, mask", ("ablation_mask_protected_accuracy",), "ablation_mask_seed_consistency"),
    ("f_p on X_p, no subtraction", ("ablation_no_subtraction_protected_accuracy",),
     "ablation_no_subtraction_seed_consistency"),
    ("f_p on X_p, dwt", ("ablation_dwt_protected_accuracy",), "ablation_dwt_seed_consistency"),
)

UTILITY_HEADERS = ("run", "recognizer", "accuracy", "vs_baseline", "seed_consistency")
RECOVERY_HEADERS = ("run", "attacker", "ssim", "psnr", "floor_ssim", "above_floor")
RESIDUE_HEADERS = ("run", "mean_residue_l1", "mean_image_l1")


def _number(value) -> Optional[float]:
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def _first(values: Mapping[str, object], keys: Sequence[str]) -> Optional[float]:
    for key in keys:
        number = _number(values.get(key))
        if number is not None:
            return number
    return None


def _run_name(report_path: str) -> str:
    parent = str(PurePosixPath(report_path.replace("\\", "/")).parent)
    return parent if parent != "." else "(root)"


def _recovery_row(run: str, attacker: str, ssim_value, psnr_value, floor_value) -> Tuple:
    ssim_value, psnr_value, floor_value = _number(ssim_value), _number(psnr_value), _number(floor_value)
    above = ssim_value - floor_value if ssim_value is not None and floor_value is not None else None
    return (run, attacker, ssim_value, psnr_value, floor_value, above)


def comparison_rows(reports: Mapping[str, Mapping[str, object]]) -> Dict[str, List[Tuple]]:
    """
    Collect comparison rows from parsed *_report.txt files keyed by their path.

    Reports in one directory form one run. Returns rows for three tables:
    'utility' (recognizer accuracy against the X baseline), 'recovery'
    (attacker SSIM/PSNR against the mean-image floor) and 'residue'
    (mean |R'| against mean |X|).
    """
    runs: Dict[str, Dict[str, object]] = {}
    for path, values in reports.items():
        runs.setdefault(_run_name(path), {}).update(values)

    utility, residue = [], []
    for run, values in runs.items():
        baseline = _number(values.get("baseline_accuracy"))
        for label, keys, consistency_key in UTILITY_ROWS:
            accuracy = _first(values, keys)
            if accuracy is None:
                continue
            gap = accuracy - baseline if baseline is not None and label != UTILITY_ROWS[0][0] else None
            consistency = _number(values.get(consistency_key)) if consistency_key else None
            utility.append((run, label, accuracy, gap, consistency))
        blank = _number(values.get("mean_residue_l1", values.get("ablation_r_mean_residue_l1")))
        if blank is not None:
            image = _number(values.get("mean_image_l1", values.get("ablation_r_mean_image_l1")))
            residue.append((run, blank, image))

    recovery = []
    for path, values in reports.items():
        run = _run_name(path)
        if "mode" in values and "ssim_mean" in values:
            recovery.append(_recovery_row(run, f"{values['mode']} attacker", values["ssim_mean"],
                                          values.get("psnr_mean"), values.get("floor_ssim")))
        if "same_ssim_mean" in values:
            recovery.append(_recovery_row(run, "fixed, same seed", values["same_ssim_mean"],
                                          values.get("same_psnr_mean"), values.get("same_floor_ssim")))
            recovery.append(_recovery_row(run, "fixed, other seeds", values.get("different_ssim_mean"),
                                          None, values.get("same_floor_ssim")))
        for variant in ("no_subtraction", "dwt"):
            key = f"ablation_{variant}_attack_ssim"
            if key in values:
                recovery.append(_recovery_row(run, f"random attacker, {variant.replace('_', ' ')}", values[key],
                                              None, values.get(f"ablation_{variant}_attack_floor_ssim")))
    return {"utility": utility, "recovery": recovery, "residue": residue}


def format_comparison(reports: Mapping[str, Mapping[str, object]]) -> str:
    """Recognition-accuracy, recovery and blank-residue tables; empty when no report matches."""
    rows = comparison_rows(reports)
    parts = []
    for title, headers, key in (
        ("Recognition accuracy", UTILITY_HEADERS, "utility"),
        ("Recovery attacks", RECOVERY_HEADERS, "recovery"),
        ("Blank residue", RESIDUE_HEADERS, "residue"),
    ):
        if rows[key]:
            parts.append(f"{title}\n{'-' * len(title)}\n" + format_table(headers, rows[key]))
    return "\n".join(parts)
