"""Weibull accelerated failure time regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..base import MODEL_FORMAT_VERSION, ConvergenceError, check_features, require_events


@dataclass(frozen=True, eq=False)
class WeibullAftModel:
    """S(t|x) = exp(-(t / scale(x))**shape), scale(x) = exp(intercept + x @ coefficients)."""

    intercept: float
    coefficients: np.ndarray
    shape: float
    iterations: int = 0
    gradient_norm: float = 0.0

    def log_scale(self, X) -> np.ndarray:
        X = check_features(X, self.coefficients.shape[0])
        return self.intercept + X @ self.coefficients

    def predict_risk(self, X) -> np.ndarray:
        # a contracted time scale means earlier failure
        return -self.log_scale(X)

    def predict_median(self, X) -> np.ndarray:
        return np.exp(self.log_scale(X)) * np.log(2.0) ** (1.0 / self.shape)

    def survival(self, t, X) -> np.ndarray:
        """S(t|x) for each row of X (rows) and each time in t (columns)."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        lam = np.exp(self.log_scale(X))
        return np.exp(-(t[None, :] / lam[:, None]) ** self.shape)

    def to_json(self) -> dict:
        return {"format_version": MODEL_FORMAT_VERSION, "model": "weibull",
                "intercept": self.intercept, "coefficients": self.coefficients.tolist(),
                "shape": self.shape, "iterations": self.iterations,
                "gradient_norm": self.gradient_norm}

    @classmethod
    def from_json(cls, d):
        return cls(d["intercept"], np.array(d["coefficients"]), d["shape"],
                   d["iterations"], d["gradient_norm"])


def weibull_loglik(params, Z, log_t, event, derivatives=True):
    """Censored log-likelihood in ``params = (intercept, coefficients..., log shape)``.

    ``Z`` carries a leading column of ones.
    """
    beta, s = params[:-1], params[-1]
    rho = np.exp(s)
    u = log_t - Z @ beta
    z = rho * u
    ez = np.exp(z)
    d = event.astype(np.float64)
    ll = float(np.sum(d * (s - log_t + z) - ez))
    if not derivatives:
        return ll
    r_eta = rho * (ez - d)               # d ll_i / d eta_i
    r_s = d * (1.0 + z) - z * ez         # d ll_i / d s
    grad = np.concatenate([Z.T @ r_eta, [r_s.sum()]])
    h_ee = -rho * rho * ez
    h_es = r_eta + rho * ez * z
    h_ss = d * z - z * ez - z * z * ez
    p = Z.shape[1]
    hess = np.empty((p + 1, p + 1))
    hess[:p, :p] = Z.T @ (h_ee[:, None] * Z)
    hess[:p, p] = hess[p, :p] = Z.T @ h_es
    hess[p, p] = h_ss.sum()
    return ll, grad, hess


def weibull_fit(train, tolerance: float = 1e-9, max_iter: int = 100,
                max_halvings: int = 30) -> WeibullAftModel:
    """Maximum likelihood by damped Newton on (intercept, coefficients, log shape).

    Convergence: max-norm of the gradient of the per-subject average
    log-likelihood at most ``tolerance``.
    """
    require_events(train.event, 2, "Weibull AFT model")
    if np.any(train.time <= 0):
        raise ValueError("Weibull AFT needs positive times")
    n, m = train.X.shape
    Z = np.hstack([np.ones((n, 1)), train.X])
    log_t = np.log(train.time)
    event = train.event
    # exponential fit as the starting point
    params = np.zeros(m + 2)
    params[0] = np.log(train.time.sum() / event.sum())
    ll, grad, hess = weibull_loglik(params, Z, log_t, event)
    gnorm = np.max(np.abs(grad)) / n
    it = 0
    while gnorm > tolerance:
        if it == max_iter:
            raise ConvergenceError(
                f"Weibull fit did not converge in {max_iter} iterations (gradient {gnorm:.3g})",
                params, gnorm)
        it += 1
        info = -hess
        damping = 0.0
        while True:
            try:
                chol = np.linalg.cholesky(info + damping * np.eye(m + 2))
                break
            except np.linalg.LinAlgError:
                damping = max(2 * damping, 1e-8 * np.trace(np.abs(info)) + 1e-12)
        step = np.linalg.solve(chol.T, np.linalg.solve(chol, grad))
        t = 1.0
        # near the optimum the predicted gain drops below the rounding of ll;
        # the line search cannot judge such steps, so take them whole
        if 0.5 * grad @ step <= 64 * np.finfo(float).eps * (1.0 + abs(ll)):
            cand = params + step
        else:
            for _ in range(max_halvings + 1):
                cand = params + t * step
                c_ll = weibull_loglik(cand, Z, log_t, event, derivatives=False)
                if np.isfinite(c_ll) and c_ll >= ll:
                    break
                t *= 0.5
            else:
                raise ConvergenceError("Weibull fit stalled: no ascent along Newton step",
                                       params, gnorm)
        params = cand
        ll, grad, hess = weibull_loglik(params, Z, log_t, event)
        gnorm = np.max(np.abs(grad)) / n
    return WeibullAftModel(float(params[0]), params[1:-1].copy(), float(np.exp(params[-1])),
                           it, float(gnorm))
