"""
Logistic regression and a one-hidden-layer tanh perceptron, trained by seeded
mini-batch gradient descent on the mean logistic loss.

Labels are 0/1 and the models output a single logit; a response of 1 is
predicted when the logit is positive.
"""

import logging

import numpy as np

logger = logging.getLogger(__name__)


def sigmoid(z):
    # exp(-log(1 + exp(-z))) never overflows
    return np.exp(-np.logaddexp(0.0, -z))


def logistic_loss(z, y) -> float:
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


class Learner:
    kind = ""
    param_names: tuple[str, ...] = ()

    def __init__(self, **params):
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in self.param_names}

    def logits(self, X) -> np.ndarray:
        raise NotImplementedError

    def loss_and_grad(self, X, y) -> tuple[float, dict]:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return (self.logits(X) > 0).astype(np.uint8)

    def fit(self, X, y, learning_rate: float, epochs: int, batch_size: int, rng: np.random.Generator) -> float:
        """Mini-batch gradient descent over shuffled epochs; returns the final loss on the whole set."""
        y = np.asarray(y, dtype=np.float64)
        rows = X.shape[0]
        for epoch in range(epochs):
            order = rng.permutation(rows)
            for start in range(0, rows, batch_size):
                batch = order[start : start + batch_size]
                _, grads = self.loss_and_grad(X[batch], y[batch])
                for name, grad in grads.items():
                    self.params[name] -= learning_rate * grad
            if logger.isEnabledFor(logging.DEBUG):
                logger.debug("%s epoch %d: loss %.5f", self.kind, epoch + 1, logistic_loss(self.logits(X), y))
        return logistic_loss(self.logits(X), y)


class LogisticRegression(Learner):
    kind = "lr"
    param_names = ("w", "b")

    @classmethod
    def initial(cls, n_features: int, rng=None) -> "LogisticRegression":
        return cls(w=np.zeros(n_features), b=np.zeros(1))

    def logits(self, X):
        return X @ self.params["w"] + self.params["b"][0]

    def loss_and_grad(self, X, y):
        z = self.logits(X)
        residual = (sigmoid(z) - y) / X.shape[0]
        return logistic_loss(z, y), {"w": X.T @ residual, "b": np.array([residual.sum()])}


class Mlp(Learner):
    kind = "mlp"
    param_names = ("W1", "b1", "w2", "b2")

    @classmethod
    def initial(cls, n_features: int, rng: np.random.Generator, hidden: int = 64) -> "Mlp":
        return cls(
            W1=rng.normal(0.0, 1.0 / np.sqrt(n_features), size=(n_features, hidden)),
            b1=np.zeros(hidden),
            w2=rng.normal(0.0, 1.0 / np.sqrt(hidden), size=hidden),
            b2=np.zeros(1),
        )

    @property
    def hidden(self) -> int:
        return self.params["b1"].size

    def _forward(self, X):
        H = np.tanh(X @ self.params["W1"] + self.params["b1"])
        return H, H @ self.params["w2"] + self.params["b2"][0]

    def logits(self, X):
        return self._forward(X)[1]

    def loss_and_grad(self, X, y):
        H, z = self._forward(X)
        dz = (sigmoid(z) - y) / X.shape[0]
        dpre = np.outer(dz, self.params["w2"]) * (1.0 - H**2)
        grads = {
            "W1": X.T @ dpre,
            "b1": dpre.sum(axis=0),
            "w2": H.T @ dz,
            "b2": np.array([dz.sum()]),
        }
        return logistic_loss(z, y), grads


LEARNERS = {LogisticRegression.kind: LogisticRegression, Mlp.kind: Mlp}
