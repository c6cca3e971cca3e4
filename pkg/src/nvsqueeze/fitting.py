"""Curve fits used to summarize sweeps, as scikit-learn style regressors.

Both estimators take a single feature column ``X`` (spin number or noise
level) and fit by Levenberg-Marquardt. They compose with the usual
``get_params`` / ``set_params`` / ``clone`` machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, validate_data

from .exceptions import FitError

MAX_ITERATIONS = 500


@dataclass
class FitResult:
    model: str
    params: dict
    covariance: np.ndarray | None
    residual_norm: float
    converged: bool
    n_points: int
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        cov = None if self.covariance is None else np.asarray(self.covariance).tolist()
        return dict(model=self.model, params=dict(self.params), covariance=cov,
                    residual_norm=self.residual_norm, converged=self.converged,
                    n_points=self.n_points, **self.extra)


def _covariance(jac, residuals, n_params):
    dof = max(len(residuals) - n_params, 1)
    try:
        jtj_inv = np.linalg.pinv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return None
    return jtj_inv * float(residuals @ residuals) / dof


class _LMRegressor(RegressorMixin, BaseEstimator):
    _param_names: tuple = ()
    _model_name = ""
    _min_points = 1

    def _check_input(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=self._min_points, y_numeric=True)
        if X.shape[1] != 1:
            raise FitError(f"expected a single feature column, got {X.shape[1]}")
        return X[:, 0].astype(float), y.astype(float)

    def _solve(self, x, y, p0, residual):
        sol = least_squares(residual, p0, method="lm", max_nfev=MAX_ITERATIONS * (len(p0) + 1),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15)
        self.coef_ = sol.x
        self.converged_ = bool(sol.success) and sol.status > 0
        self.residual_norm_ = float(np.linalg.norm(sol.fun))
        self.covariance_ = _covariance(sol.jac, sol.fun, len(p0))
        self.n_iter_ = int(sol.nfev)
        return self

    @property
    def params_(self) -> dict:
        check_is_fitted(self, "coef_")
        return dict(zip(self._param_names, (float(v) for v in self.coef_)))

    def result(self) -> FitResult:
        check_is_fitted(self, "coef_")
        return FitResult(model=self._model_name, params=self.params_, covariance=self.covariance_,
                         residual_norm=self.residual_norm_, converged=self.converged_,
                         n_points=self.n_points_)

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return self._model(X[:, 0].astype(float), self.coef_)


class PowerLawRegressor(_LMRegressor):
    """``y = A x^p``; pass ``prefactor`` to hold ``A`` fixed and fit ``p`` alone.

    Initialized by linear regression of ``log y`` on ``log x``.
    """

    _model_name = "power_law"
    _param_names = ("A", "p")
    _min_points = 2

    def __init__(self, prefactor: float | None = None):
        self.prefactor = prefactor

    @staticmethod
    def _model(x, coef):
        return coef[0] * x ** coef[1]

    def fit(self, X, y):
        X = np.asarray(X, dtype=float).reshape(len(X), -1)
        x, y = self._check_input(X, y)
        self.n_features_in_ = 1
        self.n_points_ = len(x)
        if len(x) < (2 if self.prefactor is not None else 3):
            raise FitError("power-law fit needs at least 3 points (2 with a fixed prefactor)")
        if np.any(x <= 0) or np.any(y <= 0):
            raise FitError("power-law fit needs positive data")
        slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
        if self.prefactor is None:
            self._solve(x, y, np.array([np.exp(intercept), slope]),
                        lambda c: self._model(x, c) - y)
        else:
            A = float(self.prefactor)
            self._solve(x, y, np.array([slope]), lambda c: A * x ** c[0] - y)
            self.coef_ = np.array([A, self.coef_[0]])
            if self.covariance_ is not None:
                cov = np.zeros((2, 2))
                cov[1, 1] = self.covariance_[0, 0]
                self.covariance_ = cov
        return self


class TwoTermExpRegressor(_LMRegressor):
    """``y = a exp(b x) + c exp(d x)`` with ``b <= d`` after fitting.

    Started from a single-exponential fit split into a fast and a slow term.
    """

    _model_name = "two_term_exp"
    _param_names = ("a", "b", "c", "d")
    _min_points = 5

    def __init__(self, split: float = 4.0):
        self.split = split

    @staticmethod
    def _model(x, coef):
        a, b, c, d = coef
        return a * np.exp(b * x) + c * np.exp(d * x)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float).reshape(len(X), -1)
        x, y = self._check_input(X, y)
        self.n_features_in_ = 1
        self.n_points_ = len(x)
        if len(x) < 5:
            raise FitError("two-term exponential fit needs at least 5 points")
        mask = y > 0
        if mask.sum() >= 2:
            rate, log_amp = np.polyfit(x[mask], np.log(y[mask]), 1)
        else:
            rate, log_amp = -1.0 / max(np.ptp(x), 1e-12), 0.0
        amp = np.exp(log_amp)
        p0 = np.array([amp / 2, rate * self.split, amp / 2, rate / self.split])
        self._solve(x, y, p0, lambda c: self._model(x, c) - y)
        if self.coef_[1] > self.coef_[3]:
            order = [2, 3, 0, 1]
            self.coef_ = self.coef_[order]
            if self.covariance_ is not None:
                self.covariance_ = self.covariance_[np.ix_(order, order)]
        return self


def fit_power_law(points, prefactor: float | None = None) -> FitResult:
    """Fit ``(x, y)`` pairs to ``A x^p``."""
    x, y = np.asarray(points, dtype=float).T
    return PowerLawRegressor(prefactor=prefactor).fit(x[:, None], y).result()


def fit_two_term_exp(points) -> FitResult:
    """Fit ``(x, y)`` pairs to ``a e^{bx} + c e^{dx}``."""
    x, y = np.asarray(points, dtype=float).T
    return TwoTermExpRegressor().fit(x[:, None], y).result()
