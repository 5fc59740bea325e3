"""Complete DPLL satisfiability solver over CNF formulas.

Literals use the DIMACS convention: variable ``v`` is the literal ``v`` and
its negation is ``-v``. The search is deterministic: the branching variable
is the lowest-index unassigned one (or a seeded permutation of the
variables), and ``False`` is always tried first.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

Assignment = dict[int, bool]


class MalformedFormula(ValueError):
    pass


@dataclass
class CnfFormula:
    num_vars: int = 0
    clauses: list[tuple[int, ...]] = field(default_factory=list)

    def new_var(self) -> int:
        self.num_vars += 1
        return self.num_vars

    def add_clause(self, lits: Iterable[int]) -> None:
        self.clauses.append(tuple(lits))

    def validate(self) -> None:
        for clause in self.clauses:
            for lit in clause:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise MalformedFormula(
                        f"literal {lit} outside 1..{self.num_vars} in clause {clause}")

    def copy(self) -> "CnfFormula":
        return CnfFormula(self.num_vars, list(self.clauses))

    def evaluate(self, model: Assignment) -> bool:
        return all(any(model.get(abs(l), False) == (l > 0) for l in c)
                   for c in self.clauses)

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        lines += [" ".join(map(str, c)) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dimacs(cls, text: str) -> "CnfFormula":
        num_vars = None
        clauses: list[tuple[int, ...]] = []
        pending: list[int] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("c") or line.startswith("%"):
                continue
            if line.startswith("p"):
                parts = line.split()
                if len(parts) != 4 or parts[1] != "cnf":
                    raise MalformedFormula(f"bad header: {line!r}")
                num_vars = int(parts[2])
                continue
            for tok in line.split():
                v = int(tok)
                if v == 0:
                    clauses.append(tuple(pending))
                    pending = []
                else:
                    pending.append(v)
        if num_vars is None:
            raise MalformedFormula("missing 'p cnf' header")
        if pending:
            clauses.append(tuple(pending))
        f = cls(num_vars, clauses)
        f.validate()
        return f


def add_assumption(f: CnfFormula, lit: int) -> CnfFormula:
    """Return a copy of ``f`` with the unit clause ``(lit)`` appended.

    Assuming a literal that is already a unit clause adds nothing.
    """
    if lit == 0 or abs(lit) > f.num_vars:
        raise MalformedFormula(f"assumption {lit} outside 1..{f.num_vars}")
    g = f.copy()
    if (lit,) not in g.clauses:
        g.clauses.append((lit,))
    return g


def solve(f: CnfFormula, *, seed: Optional[int] = None, learn: bool = True,
          check: bool = False) -> Optional[Assignment]:
    """Return a satisfying assignment of ``f`` or ``None`` if unsatisfiable.

    ``seed`` permutes the branching order deterministically; ``learn``
    enables conflict clause learning with non-chronological backtracking
    (plain chronological DPLL otherwise). With ``check`` the returned model
    is re-evaluated against every clause.
    """
    f.validate()
    model = _Solver(f, seed, learn).run()
    if check and model is not None and not f.evaluate(model):
        raise AssertionError("solver returned a non-model")
    return model


class _Solver:
    def __init__(self, f: CnfFormula, seed: Optional[int], learn: bool):
        self.n = f.num_vars
        self.learn = learn
        order = list(range(1, self.n + 1))
        if seed is not None:
            random.Random(seed).shuffle(order)
        self.order = order
        self.value = [0] * (self.n + 1)      # 1 true, -1 false, 0 free
        self.level = [0] * (self.n + 1)
        self.reason: list[Optional[list[int]]] = [None] * (self.n + 1)
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.watches: dict[int, list[list[int]]] = {}
        self.order_pos = 0
        self.units: list[int] = []
        self.empty = False
        # chronological mode: per-level flag telling whether the decision
        # at that level was already flipped
        self.flipped: list[bool] = []
        self._load(f.clauses)

    def _load(self, raw_clauses):
        clauses = []
        for raw in raw_clauses:
            lits = list(dict.fromkeys(raw))
            if any(-l in lits for l in lits):
                continue
            if not lits:
                self.empty = True
                return
            clauses.append(lits)
        # pure literals at the root
        pos = [False] * (self.n + 1)
        neg = [False] * (self.n + 1)
        for c in clauses:
            for l in c:
                if l > 0:
                    pos[l] = True
                else:
                    neg[-l] = True
        for v in range(1, self.n + 1):
            if pos[v] and not neg[v]:
                self.units.append(v)
            elif neg[v] and not pos[v]:
                self.units.append(-v)
        for c in clauses:
            if len(c) == 1:
                self.units.append(c[0])
            else:
                self._watch(c)

    def _watch(self, c: list[int]) -> None:
        self.watches.setdefault(-c[0], []).append(c)
        self.watches.setdefault(-c[1], []).append(c)

    def _lit_value(self, lit: int) -> int:
        v = self.value[lit if lit > 0 else -lit]
        return v if lit > 0 else -v

    def _assign(self, lit: int, reason) -> None:
        var = lit if lit > 0 else -lit
        self.value[var] = 1 if lit > 0 else -1
        self.level[var] = len(self.trail_lim)
        self.reason[var] = reason
        self.trail.append(lit)

    def _propagate(self) -> Optional[list[int]]:
        value = self.value
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            # clauses watching -p (stored under key p) lost a literal
            ws = self.watches.get(p)
            if not ws:
                continue
            false_lit = -p
            i = j = 0
            n = len(ws)
            conflict = None
            while i < n:
                c = ws[i]
                i += 1
                if c[0] == false_lit:
                    c[0], c[1] = c[1], false_lit
                first = c[0]
                fv = value[first] if first > 0 else -value[-first]
                if fv == 1:
                    ws[j] = c
                    j += 1
                    continue
                found = False
                for k in range(2, len(c)):
                    lk = c[k]
                    lv = value[lk] if lk > 0 else -value[-lk]
                    if lv != -1:
                        c[1], c[k] = lk, false_lit
                        self.watches.setdefault(-lk, []).append(c)
                        found = True
                        break
                if found:
                    continue
                ws[j] = c
                j += 1
                if fv == -1:
                    conflict = c
                    while i < n:
                        ws[j] = ws[i]
                        j += 1
                        i += 1
                else:
                    self._assign(first, c)
            del ws[j:]
            if conflict is not None:
                return conflict
        return None

    def _backtrack(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        for lit in self.trail[start:]:
            var = lit if lit > 0 else -lit
            self.value[var] = 0
            self.reason[var] = None
        del self.trail[start:]
        del self.trail_lim[lvl:]
        del self.flipped[lvl:]
        self.qhead = len(self.trail)
        self.order_pos = 0

    def _analyze(self, conflict: list[int]) -> tuple[list[int], int]:
        """First-UIP conflict analysis; returns (learnt clause, backjump level)."""
        cur = len(self.trail_lim)
        seen = [False] * (self.n + 1)
        learnt = [0]
        counter = 0
        p = None
        idx = len(self.trail) - 1
        clause = conflict
        while True:
            for q in clause:
                if p is not None and q == p:
                    continue
                var = abs(q)
                if not seen[var] and self.level[var] > 0:
                    seen[var] = True
                    if self.level[var] >= cur:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            seen[abs(p)] = False
            counter -= 1
            if counter == 0:
                break
            clause = self.reason[abs(p)]
        learnt[0] = -p
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda i: self.level[abs(learnt[i])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level[abs(learnt[1])]

    def _pick(self) -> int:
        order, value = self.order, self.value
        while self.order_pos < len(order):
            v = order[self.order_pos]
            if value[v] == 0:
                return v
            self.order_pos += 1
        return 0

    def run(self) -> Optional[Assignment]:
        if self.empty:
            return None
        for lit in self.units:
            lv = self._lit_value(lit)
            if lv == -1:
                return None
            if lv == 0:
                self._assign(lit, None)
        if self._propagate() is not None:
            return None
        while True:
            var = self._pick()
            if var == 0:
                return {v: self.value[v] == 1 for v in range(1, self.n + 1)}
            self.trail_lim.append(len(self.trail))
            self.flipped.append(False)
            self._assign(-var, None)
            while True:
                conflict = self._propagate()
                if conflict is None:
                    break
                if not self.trail_lim:
                    return None
                if self.learn:
                    learnt, lvl = self._analyze(conflict)
                    self._backtrack(lvl)
                    if len(learnt) == 1:
                        self._assign(learnt[0], None)
                    else:
                        self._watch(learnt)
                        self._assign(learnt[0], learnt)
                else:
                    if not self._flip_last():
                        return None

    def _flip_last(self) -> bool:
        """Chronological backtracking: flip the deepest unflipped decision."""
        while self.trail_lim:
            lvl = len(self.trail_lim) - 1
            decision = self.trail[self.trail_lim[lvl]]
            was_flipped = self.flipped[lvl]
            self._backtrack(lvl)
            if not was_flipped:
                self.trail_lim.append(len(self.trail))
                self.flipped.append(True)
                self._assign(-decision, None)
                return True
        return False
