"""scikit-learn style front end.

``fit`` needs no data: it turns the hyper-parameters into a
:class:`~threestage.design.TestDesign`. ``predict`` runs the test on every
row of ``X``, each row being one observation sequence in arrival order.
Label 1 means H0 was rejected, 0 means H1 was rejected.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core_stats import HypothesisSpec, ParameterBox
from .design import DEFAULT_B, DEFAULT_C, DEFAULT_TOL, DesignInputs, make_design
from .procedures import PROCEDURES, Decision
from .sources import ArraySource


class ThreeStageTTest(ClassifierMixin, BaseEstimator):
    """Three-stage (or fully-sequential) GLR t-test of ``mu <= mu0`` vs ``mu >= mu1``.

    Parameters
    ----------
    mu0, mu1 : float
        Hypothesis boundaries, ``mu0 < mu1``.
    mu_lo, mu_hi, var_lo, var_hi : float
        Bounds of the parameter box.
    a0, a1 : float
        GLR thresholds in nats.
    eps : float or None
        Window margin; ``None`` means ``var_lo / 2``.
    c_frac, b_const : float
        First-stage fraction and the inflation constant of ``rho``.
    procedure : {"three_stage", "fully_sequential"}
    """

    def __init__(self, mu0=0.0, mu1=0.5, mu_lo=-1.0, mu_hi=1.5, var_lo=0.5, var_hi=2.0,
                 a0=5.0, a1=5.0, eps=None, c_frac=DEFAULT_C, b_const=DEFAULT_B,
                 tol=DEFAULT_TOL, procedure="three_stage"):
        self.mu0 = mu0
        self.mu1 = mu1
        self.mu_lo = mu_lo
        self.mu_hi = mu_hi
        self.var_lo = var_lo
        self.var_hi = var_hi
        self.a0 = a0
        self.a1 = a1
        self.eps = eps
        self.c_frac = c_frac
        self.b_const = b_const
        self.tol = tol
        self.procedure = procedure

    def fit(self, X=None, y=None):
        if self.procedure not in PROCEDURES:
            raise ValueError(f"procedure must be one of {sorted(PROCEDURES)}, got {self.procedure!r}")
        spec = HypothesisSpec(self.mu0, self.mu1)
        box = ParameterBox(self.mu_lo, self.mu_hi, self.var_lo, self.var_hi, self.eps)
        inputs = DesignInputs(self.a0, self.a1, spec, box, self.c_frac, self.b_const)
        self.design_ = make_design(inputs, self.tol)
        self.mu2_ = self.design_.mu2
        self.n_bar_ = self.design_.n_bar
        self.m_ = self.design_.m_cap
        self.n1_ = self.design_.n1
        self.classes_ = np.array([0, 1])
        return self

    def run(self, X, trace=False):
        """Full :class:`~threestage.procedures.TestOutcome` for each row."""
        check_is_fitted(self, "design_")
        X = check_array(X, ensure_min_features=2)
        run = PROCEDURES[self.procedure]
        return [run(self.design_, ArraySource(row), trace=trace) for row in X]

    def predict(self, X):
        return np.array([int(o.decision is Decision.REJECT_H0) for o in self.run(X)])

    def sample_sizes(self, X):
        """Total number of observations each row consumed before stopping."""
        return np.array([o.total_n for o in self.run(X)])
