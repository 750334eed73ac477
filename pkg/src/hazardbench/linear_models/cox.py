"""Cox proportional hazards with Efron ties, fitted by Newton-Raphson."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..base import (MODEL_FORMAT_VERSION, ConvergenceError, NumericalError, UnfittableError,
                    check_features, require_events)
from ..metrics import StepFunction

COEF_CAP = 20.0


class EfronTerms:
    """Risk-set bookkeeping for the Efron partial likelihood of one dataset.

    Built once per (time, event) vector; ``evaluate`` then works for any
    linear predictor ``eta``.
    """

    def __init__(self, time, event):
        time = np.asarray(time, dtype=np.float64)
        event = np.asarray(event, dtype=bool)
        self.n = time.shape[0]
        self.time = time
        self.event = event
        self.order = np.argsort(time, kind="stable")
        sorted_t = time[self.order]
        ev_times = np.unique(time[event])
        self.event_times = ev_times
        self.n_groups = ev_times.shape[0]
        # first position (in ascending order) still at risk at each event time
        self.start = np.searchsorted(sorted_t, ev_times, side="left")
        # number of event times <= each subject's time
        self.n_upto = np.searchsorted(ev_times, time, side="right")
        self.group = np.full(self.n, -1, dtype=np.int64)
        self.group[event] = np.searchsorted(ev_times, time[event])
        ev_idx = np.flatnonzero(event)
        ev_idx = ev_idx[np.argsort(self.group[ev_idx], kind="stable")]
        self.ev_idx = ev_idx
        g = self.group[ev_idx]
        self.row_group = g
        counts = np.bincount(g, minlength=self.n_groups)
        first = np.concatenate(([0], np.cumsum(counts)[:-1]))
        rank = np.arange(g.shape[0]) - first[g]
        self.row_frac = rank / counts[g]
        self.counts = counts

    def _suffix(self, values):
        """Sum of ``values`` over each event time's risk set."""
        v = values[self.order]
        csum = np.cumsum(v[::-1], axis=0)[::-1]
        return csum[self.start]

    def evaluate(self, eta, X=None, hessian=False):
        """Partial log-likelihood and its gradient.

        Returns ``(loglik, grad_eta)``; with ``X`` also the gradient with
        respect to coefficients, and with ``hessian=True`` the Hessian.
        """
        eta = np.asarray(eta, dtype=np.float64)
        if self.n_groups == 0:
            out = (0.0, np.zeros(self.n))
            if X is not None:
                m = X.shape[1]
                out = out + (np.zeros(m),)
                if hessian:
                    out = out + (np.zeros((m, m)),)
            return out
        shift = eta.max()
        w = np.exp(eta - shift)
        s_r = self._suffix(w)
        s_d = np.bincount(self.row_group, weights=w[self.ev_idx], minlength=self.n_groups)
        g, f = self.row_group, self.row_frac
        den = s_r[g] - f * s_d[g]
        loglik = float(eta[self.ev_idx].sum() - np.log(den).sum() - shift * den.shape[0])

        a = np.bincount(g, weights=1.0 / den, minlength=self.n_groups)
        b = np.bincount(g, weights=f / den, minlength=self.n_groups)
        cum_a = np.concatenate(([0.0], np.cumsum(a)))
        c = cum_a[self.n_upto]
        c[self.ev_idx] -= b[self.group[self.ev_idx]]
        grad_eta = self.event.astype(np.float64) - w * c
        if X is None:
            return loglik, grad_eta
        grad = X.T @ grad_eta
        if not hessian:
            return loglik, grad_eta, grad
        wx = w[:, None] * X
        z1 = self._suffix(wx)[g] - f[:, None] * np.add.reduceat(
            wx[self.ev_idx], np.concatenate(([0], np.cumsum(self.counts)[:-1])), axis=0)[g]
        z1 /= den[:, None]
        hess = -(X.T @ ((w * c)[:, None] * X) - z1.T @ z1)
        return loglik, grad_eta, grad, hess


def cox_partial_loglik_and_gradient(coefficients, train):
    """Efron partial log-likelihood and its gradient in the coefficients.

    ``train`` is a SurvivalDataset; features are centered at their means
    first, which leaves both quantities unchanged.
    """
    X = train.X - train.X.mean(axis=0)
    beta = np.asarray(coefficients, dtype=np.float64)
    loglik, _, grad = EfronTerms(train.time, train.event).evaluate(X @ beta, X)
    return loglik, grad


@dataclass(frozen=True)
class Convergence:
    iterations: int
    gradient_norm: float
    monotone_likelihood: bool
    converged: bool


@dataclass(frozen=True, eq=False)
class CoxModel:
    coefficients: np.ndarray
    feature_means: np.ndarray
    baseline_cumhaz: StepFunction
    convergence: Convergence
    loglik: float = float("nan")

    def predict_risk(self, X) -> np.ndarray:
        X = check_features(X, self.coefficients.shape[0])
        return (X - self.feature_means) @ self.coefficients

    def predict_survival(self, x) -> StepFunction:
        r = float(self.predict_risk(x)[0])
        h = self.baseline_cumhaz
        return StepFunction(h.knots, np.exp(-h.values * np.exp(r)), 1.0)

    def to_json(self) -> dict:
        c = self.convergence
        return {"format_version": MODEL_FORMAT_VERSION, "model": "cox",
                "coefficients": self.coefficients.tolist(),
                "feature_means": self.feature_means.tolist(),
                "baseline_cumhaz": self.baseline_cumhaz.to_json(),
                "convergence": {"iterations": c.iterations, "gradient_norm": c.gradient_norm,
                                "monotone_likelihood": c.monotone_likelihood,
                                "converged": c.converged},
                "loglik": self.loglik}

    @classmethod
    def from_json(cls, d):
        return cls(np.array(d["coefficients"]), np.array(d["feature_means"]),
                   StepFunction.from_json(d["baseline_cumhaz"]),
                   Convergence(**d["convergence"]), d["loglik"])


def _singular_feature(info, names):
    m = info.shape[0]
    for j in range(1, m + 1):
        if np.linalg.matrix_rank(info[:j, :j]) < j:
            return names[j - 1] if names else str(j - 1)
    return names[0] if names else "0"


def breslow_cumhaz(terms: EfronTerms, eta) -> StepFunction:
    if terms.n_groups == 0:
        return StepFunction([], [], 0.0)
    w = np.exp(eta)
    increments = terms.counts / terms._suffix(w)
    return StepFunction(terms.event_times, np.cumsum(increments), 0.0)


def cox_fit(train, tolerance: float = 1e-9, max_iter: int = 100, ridge: float = 0.0,
            max_halvings: int = 30) -> CoxModel:
    """Maximize the (optionally ridge-penalized) Efron partial likelihood.

    Convergence is declared when the max-norm of the gradient of the
    per-subject average log-likelihood drops to ``tolerance``.  If a
    coefficient passes ``COEF_CAP`` before that, the likelihood is taken
    to be monotone: the model is returned with the flag set.
    """
    require_events(train.event, 2, "Cox model")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    means = train.X.mean(axis=0)
    X = train.X - means
    n, m = X.shape
    terms = EfronTerms(train.time, train.event)

    def objective(beta):
        ll, _, g, h = terms.evaluate(X @ beta, X, hessian=True)
        return (ll - 0.5 * ridge * beta @ beta, g - ridge * beta, h - ridge * np.eye(m))

    beta = np.zeros(m)
    ll, grad, hess = objective(beta)
    monotone = False
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = np.max(np.abs(grad)) / n if m else 0.0
        if gnorm <= tolerance:
            converged = True
            it -= 1
            break
        info = -hess
        try:
            chol = np.linalg.cholesky(info)
            step = np.linalg.solve(chol.T, np.linalg.solve(chol, grad))
        except np.linalg.LinAlgError:
            try:
                step = np.linalg.solve(info, grad)
            except np.linalg.LinAlgError:
                raise NumericalError(
                    "singular information matrix at feature "
                    f"{_singular_feature(info, train.feature_names)!r}") from None
        t = 1.0
        for _ in range(max_halvings + 1):
            cand = beta + t * step
            c_ll, c_grad, c_hess = objective(cand)
            if np.isfinite(c_ll) and c_ll >= ll:
                break
            t *= 0.5
        else:
            # no ascent possible along Newton direction: numerically stationary
            break
        beta, ll, grad, hess = cand, c_ll, c_grad, c_hess
        if np.max(np.abs(beta)) > COEF_CAP:
            monotone = True
            break
    gnorm = float(np.max(np.abs(grad)) / n) if m else 0.0
    if gnorm <= tolerance:
        converged = True
    if not converged and not monotone:
        if gnorm > max(tolerance, 1e-6):
            raise ConvergenceError(f"Cox fit did not converge in {max_iter} iterations",
                                   beta, gnorm)
    eta = X @ beta
    return CoxModel(beta, means, breslow_cumhaz(terms, eta),
                    Convergence(it, gnorm, monotone, converged), float(ll))
