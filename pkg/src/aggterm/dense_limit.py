"""Limit prediction for aggregation terms on densifying graph models.

On models whose expected degree grows without bound (constant, root, or
logarithmic edge-probability schedules, and block models with fixed block
probabilities), the large-n value of a term stops depending on the sampled
graph: walk-return encodings vanish, and every aggregate, local or global,
turns into a ratio of expectations over fresh i.i.d. feature draws for the
bound variable:

    e[ wmean[v](rho, h, eta) ]  ->  E_b[e_rho(b) h(e_eta(b))] / E_b[h(e_eta(b))]

The extension-pattern weights over adjacency decisions sum out of this
ratio: the language can only read a variable's features, never an edge
indicator, so the integrand never depends on which extension pattern the
new variable realizes (the binomial weights sum to one). The same argument
applies with community labels when features are identically distributed
across blocks. The recursion below therefore evaluates nested expectations
directly; the pattern weights themselves live in graphtypes and are tested
against their normalization identities separately.

Expectations are Monte-Carlo means. An aggregate whose body reads only its
own bound variable is "collapsed": one shared pool of mc_samples draws per
nesting depth, evaluated once and cached. An aggregate whose body also
reads outer variables is evaluated per outer sample with inner_mc fresh
draws each, which introduces O(1/inner_mc) ratio bias; raise inner_mc
when such terms need tight answers. Error bars come from rerunning the
recursion on disjoint blocks of the draws (see mc.py).

Degree-normalized aggregation has no construction here and is rejected.
"""

from __future__ import annotations

from typing import Dict, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, EvaluationError, UnsupportedTermError
from .graphs import (DenseSchedule, ErModel, FeatureDist, LogSchedule,
                     RootSchedule, SbmModel, draw_features, feature_dim)
from .graphtypes import GraphType
from .mc import ControllerValue, batch_stderr, block_slices
from .registry import FunctionRegistry, default_registry
from .rng import stream
from .terms import (Apply, Const, Feature, GcnAgg, GlobalWMean, LocalWMean,
                    Rw, Term, contains_gcn, free_vars, validate_term)

__all__ = ["dense_controller", "DenseController", "dense_limit_p"]

# rows processed at once in the nested-expectation path
_CHUNK_ROWS = 1 << 18


def dense_limit_p(model) -> float:
    """Limiting edge probability of a densifying model.

    Constant schedules keep their p; root and log schedules thin out to 0.
    Sparse-class models have no densifying limit and are rejected. Block
    models return None: their limit is the (q, P) pair, not a scalar.
    """
    if isinstance(model, ErModel):
        sched = model.schedule
        if isinstance(sched, DenseSchedule):
            return float(sched.p)
        if isinstance(sched, (RootSchedule, LogSchedule)):
            return 0.0
        raise ConfigError(
            f"schedule {sched!r} is not densifying; use the sparse construction")
    if isinstance(model, SbmModel):
        return None
    raise ConfigError(
        f"model {model!r} has no dense limit; use the sparse construction")


class _DenseEngine:
    """One controller instance: pools, caches, and the eval recursion."""

    def __init__(self, term: Term, registry: FunctionRegistry,
                 dist: FeatureDist, mc_samples: int, seed: int,
                 inner_mc: int):
        self.term = term
        self.registry = registry
        self.dist = dist
        self.d = feature_dim(dist)
        self.mc = mc_samples
        self.seed = seed
        self.inner_mc = inner_mc
        self._pools: Dict[int, np.ndarray] = {}
        # per-run state
        self._sel: slice = slice(None)
        self._tag = "full"
        self._cache: Dict[tuple, np.ndarray] = {}

    # pools ------------------------------------------------------------

    def _main_pool(self, depth: int) -> np.ndarray:
        pool = self._pools.get(depth)
        if pool is None:
            rng = stream(self.seed, "dense", "pool", depth)
            pool = draw_features(self.dist, self.mc, rng)
            pool.flags.writeable = False
            self._pools[depth] = pool
        return pool[self._sel]

    def _inner_draws(self, depth: int, lo: int, slots: int) -> np.ndarray:
        """Fresh inner draws for one chunk of a nested aggregate.

        Keyed by run tag and chunk offset: reruns reproduce exactly, while
        every outer sample gets independent draws, so the inner noise
        averages out across the run instead of floored at 1/sqrt(inner_mc).
        """
        rng = stream(self.seed, "dense", "inner", depth, self._tag, lo)
        return draw_features(self.dist, slots, rng)

    # runs ---------------------------------------------------------------

    def run(self, sel: slice, tag, env0: Dict[str, np.ndarray]) -> np.ndarray:
        self._sel = sel
        self._tag = tag
        self._cache = {}
        out = self._eval(self.term, env0, 1 if not env0 else
                         next(iter(env0.values())).shape[0], 0)
        return out[0].copy()

    def estimate(self, env0: Dict[str, np.ndarray]) -> ControllerValue:
        full = self.run(slice(None), "full", env0)
        blocks = [self.run(sl, i, env0)
                  for i, sl in enumerate(block_slices(self.mc))]
        return ControllerValue(estimate=full,
                               stderr=batch_stderr(np.stack(blocks)),
                               mc_samples=self.mc)

    # recursion ----------------------------------------------------------

    def _eval(self, term: Term, env: Dict[str, np.ndarray], m: int,
              depth: int) -> np.ndarray:
        if isinstance(term, Const):
            return np.broadcast_to(np.asarray(term.value, dtype=np.float64),
                                   (m, self.d))
        if isinstance(term, Feature):
            return env[term.var]
        if isinstance(term, Rw):
            return np.zeros((m, self.d))
        if isinstance(term, Apply):
            args = [self._eval(a, env, m, depth) for a in term.args]
            out = self.registry.call(term.fn, args)
            if not np.all(np.isfinite(out)):
                raise EvaluationError(
                    f"non-finite value from function {term.fn!r}")
            return out
        if isinstance(term, GcnAgg):
            raise UnsupportedTermError(
                "degree-normalized aggregation has no dense-limit construction")
        if isinstance(term, (LocalWMean, GlobalWMean)):
            return self._aggregate(term, env, m, depth)
        raise ConfigError(f"unknown term node {type(term).__name__}")

    def _aggregate(self, term, env, m: int, depth: int) -> np.ndarray:
        bound = term.bound
        deps = [v for v in set(free_vars(term.value)) | set(free_vars(term.weight_arg))
                if v != bound]
        if not deps:
            key = (term, depth)
            cached = self._cache.get(key)
            if cached is None:
                cached = self._collapsed(term, depth)
                self._cache[key] = cached
            return np.broadcast_to(cached, (m, self.d))
        return self._nested(term, env, m, depth)

    def _weights(self, term, eta: np.ndarray, axis: int) -> np.ndarray:
        """h(eta) with a shift that cancels in the ratio for exp weights."""
        if term.weight_map == "exp":
            shifted = eta - eta.max(axis=axis, keepdims=True)
            return np.exp(shifted)
        flat = eta.reshape(-1, self.d)
        w = self.registry.call(term.weight_map, [flat])
        return w.reshape(eta.shape)

    def _collapsed(self, term, depth: int) -> np.ndarray:
        pool = self._main_pool(depth)
        env = {term.bound: pool}
        mp = pool.shape[0]
        vals = self._eval(term.value, env, mp, depth + 1)
        eta = self._eval(term.weight_arg, env, mp, depth + 1)
        w = self._weights(term, eta, axis=0)
        num = (vals * w).mean(axis=0)
        den = w.mean(axis=0)
        if not (np.all(den > 0) and np.all(np.isfinite(den))
                and np.all(np.isfinite(num))):
            raise EvaluationError(
                f"bad aggregate denominator under weight {term.weight_map!r}")
        return num / den

    def _nested(self, term, env, m: int, depth: int) -> np.ndarray:
        inner = self.inner_mc
        out = np.empty((m, self.d))
        step = max(1, _CHUNK_ROWS // inner)
        for lo in range(0, m, step):
            hi = min(m, lo + step)
            rows = hi - lo
            total = rows * inner
            sub = {v: np.repeat(arr[lo:hi], inner, axis=0)
                   for v, arr in env.items()}
            sub[term.bound] = self._inner_draws(depth, lo, total)
            vals = self._eval(term.value, sub, total, depth + 1)
            eta = self._eval(term.weight_arg, sub, total, depth + 1)
            vals = vals.reshape(rows, inner, self.d)
            eta = eta.reshape(rows, inner, self.d)
            w = self._weights(term, eta, axis=1)
            num = (vals * w).mean(axis=1)
            den = w.mean(axis=1)
            if not (np.all(den > 0) and np.all(np.isfinite(den))
                    and np.all(np.isfinite(num))):
                raise EvaluationError(
                    f"bad aggregate denominator under weight {term.weight_map!r}")
            out[lo:hi] = num / den
        return out


class DenseController:
    """Callable limit predictor for a term with free variables.

    Call with per-variable feature vectors. A graph type over the free
    variables, and community labels under a block model, may be supplied
    for validation; with identically distributed features they cannot
    shift the value (see the module docstring), so they only get checked
    for shape and range.
    """

    def __init__(self, engine: _DenseEngine, variables, model):
        self._engine = engine
        self.variables = tuple(variables)
        self._model = model

    def __call__(self, features,
                 graph_type: Optional[GraphType] = None,
                 communities: Optional[Sequence[int]] = None) -> ControllerValue:
        env0 = self._env(features)
        k = len(self.variables)
        if graph_type is not None:
            if not isinstance(graph_type, GraphType):
                raise ConfigError("graph_type must be a GraphType")
            if graph_type.k != k:
                raise ConfigError(
                    f"graph type covers {graph_type.k} variables, term has {k}")
        if communities is not None:
            if not isinstance(self._model, SbmModel):
                raise ConfigError("community labels only apply to block models")
            labels = [int(c) for c in communities]
            mcount = len(self._model.fractions)
            if len(labels) != k or any(not (1 <= c <= mcount) for c in labels):
                raise ConfigError(
                    f"need {k} community labels in 1..{mcount}")
        return self._engine.estimate(env0)

    def _env(self, features) -> Dict[str, np.ndarray]:
        d = self._engine.d
        if isinstance(features, dict):
            missing = [v for v in self.variables if v not in features]
            if missing:
                raise ConfigError(f"missing features for {missing}")
            rows = [np.asarray(features[v], dtype=np.float64)
                    for v in self.variables]
        else:
            arr = np.asarray(features, dtype=np.float64)
            if arr.ndim == 1 and len(self.variables) == 1:
                arr = arr[None, :]
            if arr.ndim != 2 or arr.shape[0] != len(self.variables):
                raise ConfigError(
                    f"features must be ({len(self.variables)}, {d})")
            rows = list(arr)
        env = {}
        for v, row in zip(self.variables, rows):
            if row.shape != (d,):
                raise ConfigError(f"feature vector for {v!r} must have length {d}")
            if not np.all(np.isfinite(row)):
                raise ConfigError(f"feature vector for {v!r} has non-finite entries")
            env[v] = row[None, :]
        return env


def dense_controller(term: Term, model, feature_dist: FeatureDist,
                     mc_samples: int, seed: int, *,
                     registry: Optional[FunctionRegistry] = None,
                     inner_mc: int = 64
                     ) -> Union[ControllerValue, DenseController]:
    """Build the limit predictor for a term on a densifying model.

    Closed terms produce a ControllerValue outright; terms with free
    variables produce a DenseController to call with feature vectors.
    """
    reg = registry if registry is not None else default_registry()
    d = feature_dim(feature_dist)
    validate_term(term, reg, d)
    if contains_gcn(term):
        raise UnsupportedTermError(
            "degree-normalized aggregation has no dense-limit construction")
    dense_limit_p(model)
    if mc_samples < 2:
        raise ConfigError("mc_samples must be >= 2")
    if inner_mc < 2:
        raise ConfigError("inner_mc must be >= 2")
    engine = _DenseEngine(term, reg, feature_dist, mc_samples, seed, inner_mc)
    fvs = free_vars(term)
    if not fvs:
        return engine.estimate({})
    return DenseController(engine, fvs, model)
