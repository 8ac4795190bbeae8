"""Ablation suites: feature combinations, product summarisation, loss functions."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .domain import Corpus
from .pipeline import FULL_FEATURES, TABLE1_FEATURES
from .training import TrainConfig, calibrate_threshold, evaluate, train, with_threshold
from .text import Vocabulary

SUITES = ("features", "summarization", "losses")
LOSS_LABELS = {"bce": "L_BCE", "precision": "L_Precision", "sum": "L_Sum"}
REPORT_FIELDS = ("suite", "row", "loss", "precision", "recall", "f05", "threshold", "seed")


@dataclass(frozen=True)
class Cell:
    row: str
    config: TrainConfig


@dataclass(frozen=True)
class AblationRow:
    suite: str
    row: str
    loss: str
    precision: float
    recall: float
    f05: float
    threshold: float
    seed: int

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_FIELDS}


def cell_seed(base_seed: int, suite: str, index: int) -> int:
    ss = np.random.SeedSequence([base_seed, SUITES.index(suite), index])
    return int(ss.generate_state(1)[0])


def suite_cells(suite: str, base: TrainConfig) -> list[Cell]:
    if suite == "features":
        cells = [Cell(fs.name, replace(base, features=fs)) for fs in TABLE1_FEATURES]
    elif suite == "summarization":
        cells = [
            Cell(mode, replace(base, features=FULL_FEATURES, summarizer=replace(base.summarizer, mode=mode)))
            for mode in ("mean", "mmr")
        ]
    elif suite == "losses":
        cells = [
            Cell(fs.name, replace(base, features=fs, loss=replace(base.loss, kind=kind)))
            for fs in (*TABLE1_FEATURES, FULL_FEATURES)
            for kind in ("bce", "precision", "sum")
        ]
    else:
        raise ValueError(f"unknown suite {suite!r}; expected one of {SUITES}")
    return [Cell(c.row, replace(c.config, seed=cell_seed(base.seed, suite, i))) for i, c in enumerate(cells)]


def run_ablation(suite: str, base: TrainConfig, splits: Sequence[Corpus], vocab: Vocabulary) -> list[AblationRow]:
    """Train every cell of ``suite`` and report test metrics at a threshold
    calibrated on the validation split."""
    train_split, val_split, test_split = splits
    rows = []
    for cell in suite_cells(suite, base):
        result = train(cell.config, train_split, val_split, vocab)
        threshold = calibrate_threshold(result.predictor, val_split)
        report = evaluate(with_threshold(result.predictor, threshold), test_split)
        rows.append(AblationRow(
            suite, cell.row, LOSS_LABELS[cell.config.loss.kind],
            report.precision, report.recall, report.f_beta, threshold, cell.config.seed,
        ))
    return rows


def format_table(rows: Sequence[AblationRow]) -> str:
    header = ("row", "loss", "precision", "recall", "F_0.5", "threshold", "seed")
    body = [
        (r.row, r.loss, f"{100 * r.precision:.2f}", f"{100 * r.recall:.2f}", f"{100 * r.f05:.2f}", f"{r.threshold:.4f}", str(r.seed))
        for r in rows
    ]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(header)]
    lines = []
    if rows:
        lines.append(f"# suite: {rows[0].suite} (test split, threshold calibrated on validation)")
    for cols in (header, *body):
        lines.append("  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(cols, widths))).rstrip())
    return "\n".join(lines) + "\n"


def format_jsonl(rows: Sequence[AblationRow]) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in rows)
