"""
KAR Learner - Text reports for training runs and cross-validation benchmarks
"""
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from src.persistence import atomic_write_text

# Published accuracies (%) under 10 trials of 10-fold stratified CV.
# None marks a run that went out of memory.
REFERENCE_ACCURACY: Dict[str, Dict[str, Optional[float]]] = {
    "RM": {"nursery": 90.93, "letter": 74.14, "optdigits": 95.32},
    "TERRP": {"nursery": 96.46, "letter": 88.20, "optdigits": 98.16},
    "TERRM": {"nursery": 91.69, "letter": 78.42, "optdigits": 96.81},
    "SVM-Poly": {"nursery": 91.61, "letter": 77.22, "optdigits": 95.52},
    "SVM-Rbf": {"nursery": 98.24, "letter": 97.14, "optdigits": 99.13},
    "FFnet (2-layer)": {"nursery": 98.89, "letter": None, "optdigits": None},
    "KARnet (2-layer)": {"nursery": 92.39, "letter": 88.99, "optdigits": 97.25},
    "KARnet (3-layer)": {"nursery": 92.64, "letter": 94.32, "optdigits": 97.17},
    "KARnet (4-layer)": {"nursery": 92.73, "letter": 94.12, "optdigits": 96.96},
}

# hidden size h behind each published KARnet figure
REFERENCE_HIDDEN: Dict[Tuple[str, str], int] = {
    ("nursery", "two_layer_h"): 100,
    ("nursery", "three_layer_2h_h"): 80,
    ("nursery", "four_layer_4h_2h_h"): 200,
    ("letter", "two_layer_h"): 500,
    ("letter", "three_layer_2h_h"): 500,
    ("letter", "four_layer_4h_2h_h"): 500,
    ("optdigits", "two_layer_h"): 500,
    ("optdigits", "three_layer_2h_h"): 200,
    ("optdigits", "four_layer_4h_2h_h"): 100,
}

RULE_LABELS = {
    "two_layer_h": "KARnet (2-layer)",
    "three_layer_2h_h": "KARnet (3-layer)",
    "four_layer_4h_2h_h": "KARnet (4-layer)",
}


def reference_rows(dataset: str) -> List[Tuple[str, Optional[float]]]:
    """(method, reported accuracy) for a benchmark; empty for unknown datasets"""
    key = dataset.lower()
    return [(method, scores[key]) for method, scores in REFERENCE_ACCURACY.items() if key in scores]


def format_accuracy(value: Optional[float]) -> str:
    return "OM" if value is None else f"{value:.2f}"


class CVReportGenerator:
    """Render a CVReport next to the published comparison table"""

    def __init__(self, report):
        self.report = report
        self.dataset = report.dataset.lower()

    def summary_lines(self) -> List[str]:
        r = self.report
        label = RULE_LABELS.get(r.structure_rule, r.structure_rule)
        hs = sorted(set(r.chosen_h.values()))
        lines = [
            "=" * 60,
            f"   {r.dataset}: {label}",
            "=" * 60,
            f"Runs:          {len(r.results)} ({len(r.trial_means())} trials)",
            f"Hidden size:   {', '.join(map(str, hs))} ({r.selection})",
            f"Accuracy:      {r.mean:.2f}% +/- {r.std:.2f}",
        ]
        published_h = REFERENCE_HIDDEN.get((self.dataset, r.structure_rule))
        if published_h is not None:
            lines.append(f"Reported h:    {published_h}")

        rows = reference_rows(self.dataset)
        if rows:
            lines.append("")
            lines.append("Reported accuracies (not computed here):")
            for method, value in rows:
                marker = "  <-" if method == label else ""
                lines.append(f"   {method:<18} {format_accuracy(value):>6}{marker}")
            reported = REFERENCE_ACCURACY.get(label, {}).get(self.dataset)
            if reported is not None:
                lines.append("")
                lines.append(f"Difference to reported {label}: {r.mean - reported:+.2f} points")
        lines.append("=" * 60)
        return lines

    def generate(self) -> str:
        return "\n".join(self.summary_lines()) + "\n"

    def save_report(self, path: Path):
        atomic_write_text(path, self.generate())


class TrainReportGenerator:
    """Human-readable view of a TrainReport plus the training score"""

    def __init__(self, train_report, score_name: str, score: float):
        self.train_report = train_report
        self.score_name = score_name
        self.score = score

    def summary_lines(self) -> List[str]:
        t = self.train_report
        lines = [
            f"Structure:     {t.input_dim} -> {'-'.join(map(str, t.widths))}",
            f"Samples:       {t.samples}",
            f"Seed:          {t.seed} ({t.init}, scale {t.init_scale})",
            f"Pinv mode:     {t.pinv_mode} ({t.pinv_calls} calls)",
            f"Clip events:   {t.total_clip_events}" + (" (flagged)" if t.clip_flagged else ""),
        ]
        if self.score_name == "accuracy":
            lines.append(f"Train acc:     {self.score:.2f}%")
        else:
            lines.append(f"Train {self.score_name}:     {self.score:.3e}")
        return lines
