"""Mean-field engine over grouped per-predicate marginal tensors.

Rules compile into implications, one per clause literal.  The message of an
implication is a planned einsum over the premise predicates' marginal
tensors, where each premise literal contributes the probability that it is
*false* (the marginal mass on the labels outside its value set).  The message
value at a hypothesis cell is the expected number of groundings whose premise
holds, and it is added, scaled by the rule weight, to the logits of the
labels in the hypothesis value set before renormalizing.  Updates are
synchronous: all messages of one iteration read the same marginal snapshot.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import planner
from .fol import Clause, CnfFormula, Literal, split_cnf, to_implications
from .kb import KnowledgeBase, ObservationMask
from .tensor import DenseTensor, EinsumSpec, softmax_lastaxis

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


class EngineError(Exception):
    """Shape mismatch, invalid rule, or numerical failure during inference."""


@dataclass
class UnaryTable:
    """Per-predicate logit tensors of shape N^arity x D."""

    tables: dict[str, np.ndarray]

    @classmethod
    def zeros(cls, kb: KnowledgeBase) -> "UnaryTable":
        return cls({name: np.zeros(kb.shape(p) + (p.num_labels,))
                    for name, p in kb.predicates.items()})

    def copy(self) -> "UnaryTable":
        return UnaryTable({k: v.copy() for k, v in self.tables.items()})

    def validate(self, kb: KnowledgeBase) -> "UnaryTable":
        for name, pred in kb.predicates.items():
            arr = self.tables.get(name)
            if arr is None:
                raise EngineError(f"missing unary table for {name}")
            want = kb.shape(pred) + (pred.num_labels,)
            if arr.shape != want:
                raise EngineError(f"unary table {name}: shape {arr.shape}, expected {want}")
            if not np.all(np.isfinite(arr)):
                raise EngineError(f"unary table {name} contains non-finite values")
        return self


@dataclass
class MarginalTable:
    """Per-predicate marginals; last axis sums to one."""

    tables: dict[str, np.ndarray]

    def copy(self) -> "MarginalTable":
        return MarginalTable({k: v.copy() for k, v in self.tables.items()})

    def max_abs_diff(self, other: "MarginalTable") -> float:
        return max(float(np.max(np.abs(self.tables[k] - other.tables[k])))
                   for k in self.tables)

    def validate(self, kb: KnowledgeBase, atol: float = 1e-9) -> "MarginalTable":
        for name, pred in kb.predicates.items():
            arr = self.tables[name]
            if arr.min() < -atol:
                raise EngineError(f"negative marginal in {name}")
            if np.max(np.abs(arr.sum(axis=-1) - 1.0)) > atol:
                raise EngineError(f"marginals of {name} do not sum to 1")
        return self


@dataclass(frozen=True)
class PremiseInput:
    """One premise literal lowered to tensor form."""

    predicate: str
    subscript: str                       # letters of variable args, constants sliced away
    const_slices: tuple[tuple[int, int], ...]  # (axis, entity index), ascending axes
    complement_labels: tuple[int, ...]   # labels on which the literal is false

    def gather(self, q: np.ndarray) -> np.ndarray:
        for axis, pos in reversed(self.const_slices):
            q = np.take(q, pos, axis=axis)
        # mass on the labels that falsify the literal; for binary literals this
        # is exactly the single opposite-label slice
        return q[..., list(self.complement_labels)].sum(axis=-1)


@dataclass(frozen=True)
class CompiledImplication:
    """A clause literal as hypothesis plus the planned premise contraction."""

    rule_id: str
    clause_id: str
    weight: float
    hypothesis: str
    target_labels: tuple[int, ...]
    out_pattern: tuple[object, ...]      # per hypothesis arg: letter (str) or entity index (int)
    premises: tuple[PremiseInput, ...]
    spec: EinsumSpec
    plan: planner.ContractionPlan

    def describe(self) -> str:
        return (f"rule {self.rule_id} -> {self.hypothesis}: spec {self.spec} "
                f"M'={self.plan.max_intermediate_arity}")


@dataclass
class EngineConfig:
    iterations: int = 5
    weights: dict[str, float] = field(default_factory=dict)  # rule id -> override
    damping: float = 0.0
    clamp_observed: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise EngineError("iterations must be >= 1")
        if not 0.0 <= self.damping <= 1.0:
            raise EngineError("damping must lie in [0, 1]")

    def effective_weight(self, ci: CompiledImplication) -> float:
        return self.weights.get(ci.rule_id, ci.weight)


@dataclass
class IterationTrace:
    """Optional per-iteration record for diagnostics and tests."""

    marginals: list[MarginalTable] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)


def _compile_clause(clause: Clause, kb: KnowledgeBase, rule_id: str) -> list[CompiledImplication]:
    letters: dict[str, str] = {}

    def letter(symbol: str) -> str:
        if symbol not in letters:
            if len(letters) >= len(_LETTERS):
                raise EngineError("more than 26 distinct variables in one clause")
            letters[symbol] = _LETTERS[len(letters)]
        return letters[symbol]

    def check(lit: Literal):
        pred = kb.predicates.get(lit.predicate.name)
        if pred is None:
            raise EngineError(f"rule {rule_id}: predicate {lit.predicate.name!r} "
                              "not in knowledge base")
        if pred != lit.predicate:
            raise EngineError(f"rule {rule_id}: predicate {lit.predicate.name!r} "
                              "differs from the knowledge-base declaration")

    for lit in clause.literals:
        check(lit)
        for term in lit.args:
            if not term.is_constant:
                letter(term.symbol)

    out = []
    for imp in to_implications(clause):
        hyp = imp.hypothesis
        pattern = tuple(kb.entity_index(t.symbol) if t.is_constant else letter(t.symbol)
                        for t in hyp.args)
        out_sub = ""
        for t in hyp.args:
            if not t.is_constant and letter(t.symbol) not in out_sub:
                out_sub += letter(t.symbol)
        premises = []
        in_subs = []
        for plit in imp.premise:
            sub = ""
            consts = []
            for axis, t in enumerate(plit.args):
                if t.is_constant:
                    consts.append((axis, kb.entity_index(t.symbol)))
                else:
                    sub += letter(t.symbol)
            premises.append(PremiseInput(plit.predicate.name, sub, tuple(consts),
                                         plit.complement_labels()))
            in_subs.append(sub)
        spec = EinsumSpec(tuple(in_subs), out_sub)
        extents = {ch: kb.n for sub in (*in_subs, out_sub) for ch in sub}
        cplan = planner.plan(spec, extents)
        out.append(CompiledImplication(
            rule_id=rule_id, clause_id=clause.id or rule_id,
            weight=clause.weight, hypothesis=hyp.predicate.name,
            target_labels=tuple(sorted(hyp.value_set)), out_pattern=pattern,
            premises=tuple(premises), spec=spec, plan=cplan))
    return out


def compile_rules(rules, kb: KnowledgeBase) -> list[CompiledImplication]:
    """Split CNF formulas into clauses and plan every implication."""
    compiled = []
    for i, formula in enumerate(rules):
        if isinstance(formula, Clause):
            formula = CnfFormula((formula,), weight=formula.weight,
                                 id=formula.id or f"f{i + 1}")
        rule_id = formula.id or f"f{i + 1}"
        for clause in split_cnf(formula):
            compiled.extend(_compile_clause(clause, kb, rule_id))
    return compiled


def message(ci: CompiledImplication, marginals: MarginalTable) -> DenseTensor:
    """Expected count of true-premise groundings per hypothesis cell."""
    arrays = [p.gather(marginals.tables[p.predicate]) for p in ci.premises]
    return planner.execute(ci.plan, arrays)


def _scatter_index(ci: CompiledImplication, n: int):
    """Fancy index mapping the message tensor onto hypothesis cells."""
    dims = {ch: d for d, ch in enumerate(ci.spec.output)}
    idx = []
    for item in ci.out_pattern:
        if isinstance(item, str):
            shape = [1] * len(ci.spec.output)
            shape[dims[item]] = n
            idx.append(np.arange(n).reshape(shape))
        else:
            idx.append(item)
    return tuple(idx)


def _clamp(q: np.ndarray, mask: ObservationMask, num_labels: int):
    if mask.mask.any():
        q[mask.mask] = np.eye(num_labels)[mask.labels[mask.mask]]


def iterate(phi: UnaryTable, compiled, config: EngineConfig,
            masks: dict[str, ObservationMask] | None = None,
            trace: IterationTrace | None = None) -> MarginalTable:
    """Run mean-field iterations and return the final marginals."""
    num_labels = {name: arr.shape[-1] for name, arr in phi.tables.items()}
    n = None
    for name, arr in phi.tables.items():
        if arr.ndim > 1:
            n = arr.shape[0]
    if n is None:
        n = 1
    masks = masks or {}

    q = MarginalTable({name: softmax_lastaxis(arr).data for name, arr in phi.tables.items()})
    if config.clamp_observed:
        for name, m in masks.items():
            _clamp(q.tables[name], m, num_labels[name])

    scatter = {id(ci): _scatter_index(ci, n) for ci in compiled}
    for t in range(1, config.iterations + 1):
        started = time.perf_counter()
        logits = {name: arr.copy() for name, arr in phi.tables.items()}
        for ci in compiled:
            msg = message(ci, q).data
            w = config.effective_weight(ci)
            target = logits[ci.hypothesis]
            idx = scatter[id(ci)]
            for label in ci.target_labels:
                target[idx + (label,)] += w * msg
        for name, arr in logits.items():
            if not np.all(np.isfinite(arr)):
                raise EngineError(f"non-finite logits for {name} at iteration {t}")
        new_q = MarginalTable({name: softmax_lastaxis(arr).data
                               for name, arr in logits.items()})
        if config.damping > 0.0:
            lam = config.damping
            for name in new_q.tables:
                new_q.tables[name] = (1.0 - lam) * new_q.tables[name] + lam * q.tables[name]
        if config.clamp_observed:
            for name, m in masks.items():
                _clamp(new_q.tables[name], m, num_labels[name])
        q = new_q
        if trace is not None:
            trace.seconds.append(time.perf_counter() - started)
            trace.marginals.append(q.copy())
    return q


def run_inference(rules, kb: KnowledgeBase, phi: UnaryTable, config: EngineConfig,
                  trace: IterationTrace | None = None) -> MarginalTable:
    """Compile rules against the knowledge base and iterate."""
    phi.validate(kb)
    compiled = compile_rules(rules, kb)
    return iterate(phi, compiled, config, kb.masks(), trace)


def transitivity_violations(q: np.ndarray) -> int:
    """Triples (a,b,c) whose argmax labels assert ab and bc but deny ac."""
    arr = np.asarray(q)
    if arr.ndim != 3 or arr.shape[-1] != 2 or arr.shape[0] != arr.shape[1]:
        raise EngineError("expected marginals of one binary arity-2 predicate "
                          f"(N,N,2); got shape {arr.shape}")
    b = np.argmax(arr, axis=-1).astype(np.int64)
    return int(np.einsum("ab,bc,ac->", b, b, 1 - b))
