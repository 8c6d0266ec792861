"""
Modeling attacks on single-bit CRP datasets: train on the train split,
score every test row.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from django.db import models

from feedpuf.exceptions import UsageError
from datasets.models import CrpDataset

from .features import FeatureMap, feature_width, featurize
from .learners import LEARNERS, Learner, LogisticRegression, Mlp

logger = logging.getLogger(__name__)

INIT_STREAM = 7
SHUFFLE_STREAM = 8


class ModelKind(models.TextChoices):
    LR = "lr", "Logistic regression"
    MLP = "mlp", "MLP"


@dataclass(frozen=True)
class Hyperparameters:
    learning_rate: float = 0.05
    epochs: int = 50
    batch_size: int = 256
    hidden: int = 64

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise UsageError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.hidden < 1:
            raise UsageError("epochs, batch_size and hidden must be at least 1")


@dataclass
class AttackModel:
    feature_map: FeatureMap
    kind: ModelKind
    challenge_width: int
    learner: Learner
    # epochs, learning_rate, batch_size, hidden, seed, train_rows, final_train_loss
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = feature_width(self.feature_map, self.challenge_width)
        first = self.learner.params["w" if self.kind == ModelKind.LR else "W1"]
        if first.shape[0] != expected:
            raise UsageError(f"{self.feature_map} features are {expected} wide, weights expect {first.shape[0]}")

    def predict(self, challenges) -> np.ndarray:
        return self.learner.predict(featurize(np.atleast_2d(challenges), self.feature_map))


@dataclass
class AttackReport:
    train_rows: int
    test_rows: int
    test_accuracy_pct: float
    # keys tp, tn, fp, fn with 1 as the positive class
    confusion: dict

    def __post_init__(self):
        assert 0.0 <= self.test_accuracy_pct <= 100.0


def _single_bit(ds: CrpDataset) -> None:
    if ds.response_width != 1:
        raise UsageError(f"attacks target single-bit responses, dataset has {ds.response_width}-bit responses")


def build_learner(kind: ModelKind, n_features: int, hyper: Hyperparameters, seed: int) -> Learner:
    rng = np.random.default_rng([seed, INIT_STREAM])
    if ModelKind(kind) == ModelKind.MLP:
        return Mlp.initial(n_features, rng, hyper.hidden)
    return LogisticRegression.initial(n_features, rng)


def train(ds: CrpDataset, fmap: FeatureMap, kind: ModelKind, hyper: Hyperparameters, seed: int) -> AttackModel:
    _single_bit(ds)
    if not ds.is_split or len(ds.train_idx) == 0:
        raise UsageError("the dataset has no training rows; split it first")
    fmap, kind = FeatureMap(fmap), ModelKind(kind)
    X = featurize(ds.challenges[ds.train_idx], fmap)
    y = ds.responses[ds.train_idx, 0]

    learner = build_learner(kind, X.shape[1], hyper, seed)
    loss = learner.fit(
        X, y, hyper.learning_rate, hyper.epochs, hyper.batch_size, np.random.default_rng([seed, SHUFFLE_STREAM])
    )
    logger.info("trained %s on %d %s rows of %s, loss %.4f", kind, len(y), fmap, ds.instance_id, loss)
    meta = {
        "epochs": hyper.epochs,
        "learning_rate": hyper.learning_rate,
        "batch_size": hyper.batch_size,
        "hidden": hyper.hidden if kind == ModelKind.MLP else None,
        "seed": seed,
        "train_rows": len(y),
        "final_train_loss": loss,
    }
    return AttackModel(fmap, kind, ds.challenge_width, learner, meta)


def evaluate(model: AttackModel, ds: CrpDataset) -> AttackReport:
    """Accuracy over the test split; rows sharing a challenge are scored independently."""
    _single_bit(ds)
    if ds.challenge_width != model.challenge_width:
        raise UsageError(f"model expects {model.challenge_width}-bit challenges, dataset has {ds.challenge_width}")
    if not ds.is_split or len(ds.test_idx) == 0:
        raise UsageError("the dataset has an empty test split")
    truth = ds.responses[ds.test_idx, 0].astype(bool)
    guess = model.predict(ds.challenges[ds.test_idx]).astype(bool)
    confusion = {
        "tp": int(np.count_nonzero(guess & truth)),
        "tn": int(np.count_nonzero(~guess & ~truth)),
        "fp": int(np.count_nonzero(guess & ~truth)),
        "fn": int(np.count_nonzero(~guess & truth)),
    }
    correct = confusion["tp"] + confusion["tn"]
    return AttackReport(
        train_rows=model.train_meta.get("train_rows", 0),
        test_rows=len(truth),
        test_accuracy_pct=100.0 * correct / len(truth),
        confusion=confusion,
    )


def model_from_params(fmap, kind, challenge_width: int, params: dict, meta=None) -> AttackModel:
    learner = LEARNERS[ModelKind(kind).value](**params)
    return AttackModel(FeatureMap(fmap), ModelKind(kind), challenge_width, learner, dict(meta or {}))
