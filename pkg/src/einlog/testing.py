"""Random instance generation and the engine-versus-oracle check suite."""

from __future__ import annotations

import numpy as np

from . import engine, oracle
from .engine import EngineConfig, MarginalTable, UnaryTable
from .fol import Clause, CnfFormula, Literal, Predicate, variable
from .kb import KnowledgeBase
from .tensor import softmax_lastaxis

_VARS = ("x", "y", "z")


def _random_clause(rng: np.random.Generator, predicates, max_literals: int,
                   weight: float, cid: str) -> Clause | None:
    length = int(rng.integers(1, max_literals + 1))
    merged: dict[tuple, Literal] = {}
    order = []
    for _ in range(length):
        pred = predicates[int(rng.integers(len(predicates)))]
        args = tuple(variable(_VARS[int(rng.integers(len(_VARS)))])
                     for _ in range(pred.arity))
        size = int(rng.integers(1, pred.num_labels))
        values = frozenset(int(v) for v in
                           rng.choice(pred.num_labels, size=size, replace=False))
        lit = Literal(pred, args, values)
        key = lit.atom_key()
        if key in merged:
            union = merged[key].value_set | lit.value_set
            if len(union) == pred.num_labels:
                return None  # tautology after merging; caller redraws
            merged[key] = Literal(pred, args, union)
        else:
            merged[key] = lit
            order.append(key)
    return Clause(tuple(merged[k] for k in order), weight=weight, id=cid)


def random_instance(rng: np.random.Generator, *, max_entities: int = 6,
                    max_predicates: int = 3, max_arity: int = 2,
                    max_clauses: int = 4, max_literals: int = 3,
                    max_labels: int = 3, p_observe: float = 0.25):
    """A random KB, rule list, and unary table within the given bounds."""
    n = int(rng.integers(2, max_entities + 1))
    entities = [f"e{i}" for i in range(n)]
    predicates = []
    for i in range(int(rng.integers(1, max_predicates + 1))):
        arity = int(rng.integers(1, max_arity + 1))
        labels = int(rng.integers(2, max_labels + 1))
        predicates.append(Predicate(f"p{i}", arity, labels))

    observations = {}
    for pred in predicates:
        for args in np.ndindex(*((n,) * pred.arity)):
            if rng.random() < p_observe:
                observations[(pred.name, tuple(int(a) for a in args))] = \
                    int(rng.integers(pred.num_labels))
    kb = KnowledgeBase(entities, {p.name: p for p in predicates}, observations)

    rules = []
    n_clauses = int(rng.integers(1, max_clauses + 1))
    k = 0
    while k < n_clauses:
        weight = float(rng.uniform(0.2, 2.0))
        clause = _random_clause(rng, predicates, max_literals, weight, f"f{k + 1}")
        if clause is None:
            continue
        rules.append(CnfFormula((clause,), weight=weight, id=f"f{k + 1}"))
        k += 1

    phi = UnaryTable({p.name: rng.normal(0.0, 1.5, size=(n,) * p.arity + (p.num_labels,))
                      for p in predicates})
    return kb, rules, phi


def initial_marginals(phi: UnaryTable, kb: KnowledgeBase,
                      clamp_observed: bool = True) -> MarginalTable:
    """The engine's starting point: label-softmax with observed cells pinned."""
    q = MarginalTable({name: softmax_lastaxis(arr).data
                       for name, arr in phi.tables.items()})
    if clamp_observed:
        for (name, args), label in kb.observations.items():
            cell = np.zeros(kb.predicates[name].num_labels)
            cell[label] = 1.0
            q.tables[name][args] = cell
    return q


def engine_oracle_gap(kb: KnowledgeBase, rules, phi: UnaryTable, *,
                      simplified: bool = False) -> float:
    """Max |engine - sequential oracle| over unobserved cells after one step."""
    compiled = engine.compile_rules(rules, kb)
    got = engine.iterate(phi, compiled, EngineConfig(iterations=1), kb.masks())
    q0 = initial_marginals(phi, kb)
    want = oracle.naive_mf_step(q0, rules, kb, phi, simplified=simplified)
    worst = 0.0
    for name in kb.predicates:
        diff = np.abs(got.tables[name] - want.tables[name])
        latent = ~kb.masks()[name].mask
        if latent.any():
            worst = max(worst, float(diff[latent].max()))
    return worst


def run_equivalence_suite(trials: int = 25, seed: int = 0, tol: float = 1e-9,
                          verbose: bool = False) -> tuple[float, int]:
    """Random engine-vs-oracle trials; returns (worst gap, failure count)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = 0
    for t in range(trials):
        kb, rules, phi = random_instance(rng)
        gap = engine_oracle_gap(kb, rules, phi)
        worst = max(worst, gap)
        if gap > tol:
            failures += 1
            if verbose:
                print(f"trial {t}: gap {gap:.3e} exceeds {tol:.1e}")
    return worst, failures
