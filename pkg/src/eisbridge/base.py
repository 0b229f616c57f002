"""Minimal estimator base, compatible with the scikit-learn parameter API."""

from __future__ import annotations

import inspect


class BaseEstimator:
    """Base class providing ``get_params`` / ``set_params``.

    Subclasses follow the usual convention: every ``__init__`` argument is
    stored verbatim on ``self`` under the same name, and all state learned
    during ``fit`` goes into attributes with a trailing underscore.
    """

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [
            name
            for name, p in sig.parameters.items()
            if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        ]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(
                    f"invalid parameter {key!r} for {type(self).__name__}"
                )
            setattr(self, key, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in sorted(self.get_params().items()))
        return f"{type(self).__name__}({args})"


def clone(estimator):
    """Fresh, unfitted copy with identical constructor parameters."""
    return type(estimator)(**estimator.get_params())
