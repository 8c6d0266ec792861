"""
The modeling-attack comparison: for each PUF category, attack the acyclic
design, its cyclic version and a faulty cyclic version at the same challenge
budget.

Every cell re-derives its instance, wiring, faults and datasets from the
config seeds, so cells can run in any order or in worker processes.
"""

import logging
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from feedpuf.tables import format_table, pct
from datasets.generation import generate_acyclic, generate_cyclic, split_80_20
from datasets.models import CrpDataset
from pufs.cyclic import CyclicPuf, sample_feedback
from pufs.faults import sample_fault_spec
from pufs.models import PufCategory, PufForm, VariationModel
from pufs.simulation import sample_instance

from .training import Hyperparameters, evaluate, train

logger = logging.getLogger(__name__)

FORMS = (PufForm.ACYCLIC, PufForm.CYCLIC, PufForm.FAULTY_CYCLIC)


def design_name(category: PufCategory, form: PufForm) -> str:
    name = PufCategory(category).label
    if form == PufForm.ACYCLIC:
        return name
    return f"Cyc{name}" if form == PufForm.CYCLIC else f"Faulty Cyc{name}"


def _same_challenges(clean: CrpDataset, held_out: CrpDataset) -> CrpDataset:
    """Split ``clean`` so its test side holds exactly the challenges held out of ``held_out``."""
    test_keys = {row.tobytes() for row in held_out.challenges[held_out.test_idx]}
    in_test = np.fromiter((row.tobytes() in test_keys for row in clean.challenges), dtype=bool, count=len(clean))
    return clean.with_split(np.flatnonzero(~in_test), np.flatnonzero(in_test), split_seed=held_out.meta["split_seed"])


def run_cell(config: dict, category: str, form: str) -> dict:
    category, form = PufCategory(category), PufForm(form)
    n_c, budget = config["challenge_width"], config["num_challenges"]
    inst = sample_instance(
        category, n_c, 1, VariationModel(**config["variation"]), config["lot_seed"], config["instance_seed"]
    )
    hyper = Hyperparameters(**config["hyper"])

    taps = faults = 0
    if form == PufForm.ACYCLIC:
        ds = generate_acyclic(inst, budget, config["challenge_seed"])
        clean_device = None
    else:
        fb = sample_feedback(n_c, 1, config["feedback"][category.value], config["feedback_seed"])
        spec = None
        if form == PufForm.FAULTY_CYCLIC:
            spec = sample_fault_spec(inst, fb, config["faults"][category.value], config["fault_seed"])
            faults = len(spec)
        taps = len(fb)
        device = CyclicPuf(inst, fb, spec)
        ds = generate_cyclic(device, budget, config["cycles"], config["challenge_seed"], dedupe=config["dedupe"])
        clean_device = CyclicPuf(inst, fb) if spec else None
    ds = split_80_20(ds, config["split_seed"])

    model = train(ds, config["feature_map"], config["model"], hyper, config["train_seed"])
    report = evaluate(model, ds)
    clean_accuracy = None
    if clean_device is not None:
        clean = generate_cyclic(clean_device, budget, config["cycles"], config["challenge_seed"], dedupe=config["dedupe"])
        clean_accuracy = evaluate(model, _same_challenges(clean, ds)).test_accuracy_pct

    row = {
        "design": design_name(category, form),
        "category": str(category),
        "form": str(form),
        "challenge_width": n_c,
        "taps": taps,
        "faults": faults,
        "dataset_rows": len(ds),
        "crp_equivalents": ds.crp_equivalents(),
        "train_rows": report.train_rows,
        "test_rows": report.test_rows,
        "test_accuracy_pct": report.test_accuracy_pct,
        "clean_accuracy_pct": clean_accuracy,
        "confusion": report.confusion,
        "final_train_loss": model.train_meta["final_train_loss"],
    }
    logger.info("%s: %s on %d training rows", row["design"], pct(row["test_accuracy_pct"]), row["train_rows"])
    return row


def run_table1_experiment(config: dict, jobs: int = 1) -> list[dict]:
    """
    Nine rows (three per category) in a fixed order. ``config`` is validated
    ``Table1ConfigSerializer`` data.
    """
    cells = [(category, str(form)) for category in config["categories"] for form in FORMS]
    if jobs <= 1:
        return [run_cell(config, category, form) for category, form in cells]
    logger.info("running %d cells on %d workers", len(cells), jobs)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_cell, config, category, form) for category, form in cells]
        return [future.result() for future in futures]


def attack_table(rows) -> str:
    return format_table(
        ["PUF design", "Challenge size", "#Training CRPs", "Model accuracy", "vs clean", "Rows", "CRP-equivalents"],
        [
            (
                row["design"],
                row["challenge_width"],
                f"{row['train_rows']:,}",
                pct(row["test_accuracy_pct"]),
                pct(row["clean_accuracy_pct"]),
                f"{row['dataset_rows']:,}",
                f"{row['crp_equivalents']:,}",
            )
            for row in rows
        ],
    )
