"""Cox proportional hazards, Aalen additive and Weibull AFT models."""

from .aalen import AalenModel, aalen_fit
from .cox import CoxModel, EfronTerms, cox_fit, cox_partial_loglik_and_gradient
from .weibull import WeibullAftModel, weibull_fit

__all__ = ["AalenModel", "CoxModel", "EfronTerms", "WeibullAftModel", "aalen_fit", "cox_fit",
           "cox_partial_loglik_and_gradient", "weibull_fit"]
