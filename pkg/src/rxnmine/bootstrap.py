"""Iterative pattern bootstrap over a workspace directory.

Each iteration: weak-label the corpus with the current pattern set, build QA
examples, train the extractor, re-label the corpus with it, mine frequent
candidate patterns around the model's labels, rank them for review, and -- once
every candidate is decided -- merge the accepted ones into the next pattern-set
version. Rejected candidates are remembered and never proposed again.
"""

from __future__ import annotations

import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Document, MaskedText, load_corpus, load_gazetteer, prepare_document
from .errors import (
    AlreadyFinalized,
    ConflictingDecision,
    EmptyCorpus,
    NoPatterns,
    ParseError,
    PendingDecisions,
    StateError,
    UnknownCandidate,
    WorkspaceLocked,
)
from .extractor import (
    Candidate,
    ExtractorModel,
    Hyper,
    featurize,
    predict,
    save_model,
    train,
)
from .fileio import atomic_write_text
from .patterns import (
    MinedCandidate,
    Pattern,
    PatternSet,
    dedupe_and_filter,
    load_pattern_file,
    match_pattern,
    mine_candidates,
    parse_pattern,
    save_pattern_file,
)
from .roles import DEFAULT_LINGUISTIC_ROLES, PRODUCT, ROLES
from .supervision import labels_to_qa, weak_label


@dataclass(frozen=True)
class BootstrapConfig:
    iterations: int = 3
    n_min: int = 2
    n_max: int = 6
    min_freq: int = 5
    top_k_per_role: int = 50
    review_mode: str = "interactive"  # "interactive" | "auto"
    auto_accept_precision: float = 0.8
    negative_ratio: float = 1.0
    epochs: int = 5
    learning_rate: float = 0.1
    seed: int = 42
    tau: float = 0.5
    linguistic_roles: frozenset[str] = DEFAULT_LINGUISTIC_ROLES

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.auto_accept_precision <= 1.0:
            raise ValueError("auto_accept_precision must be in [0, 1]")
        if not set(self.linguistic_roles) <= set(ROLES):
            raise ValueError("linguistic_roles must be reaction roles")
        if self.review_mode not in ("interactive", "auto"):
            raise ValueError("review_mode must be 'interactive' or 'auto'")

    def hyper(self) -> Hyper:
        return Hyper(epochs=self.epochs, learning_rate=self.learning_rate, seed=self.seed)


@dataclass(frozen=True)
class Snippet:
    text: str
    match_start: int
    match_end: int


@dataclass
class ReviewCandidate:
    candidate: MinedCandidate
    precision_proxy: float
    snippets: list[Snippet] = field(default_factory=list)
    status: str = "pending"  # pending | accepted | rejected

    @property
    def candidate_id(self) -> str:
        return self.candidate.id


@dataclass(frozen=True)
class Decision:
    candidate_id: str
    verdict: str  # "accept" | "reject"
    decided_by: str  # "human" | "auto"
    timestamp: str


@dataclass
class IterationState:
    iteration: int
    pattern_set_version_before: int
    pattern_set_version_after: int
    counts: dict[str, int]
    model_path: str
    status: str = "pending"  # pending | finalized

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "pattern_set_version_before": self.pattern_set_version_before,
            "pattern_set_version_after": self.pattern_set_version_after,
            "counts": self.counts,
            "model_path": self.model_path,
            "status": self.status,
        }

    @staticmethod
    def from_json(obj: dict) -> "IterationState":
        return IterationState(
            iteration=obj["iteration"],
            pattern_set_version_before=obj["pattern_set_version_before"],
            pattern_set_version_after=obj["pattern_set_version_after"],
            counts=dict(obj["counts"]),
            model_path=obj["model_path"],
            status=obj["status"],
        )


class Workspace:
    """Directory holding the corpus, pattern versions, per-iteration review
    queues and decision logs, trained models, and a state file."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    # -- paths -------------------------------------------------------------
    @property
    def corpus_path(self) -> Path:
        return self.root / "corpus.jsonl"

    @property
    def gazetteer_path(self) -> Path:
        return self.root / "gazetteer.txt"

    @property
    def state_path(self) -> Path:
        return self.root / "state.json"

    def pattern_path(self, version: int) -> Path:
        return self.root / "patterns" / f"v{version}.tsv"

    def model_path(self, iteration: int) -> Path:
        return self.root / "models" / f"{iteration}.json"

    def queue_path(self, iteration: int) -> Path:
        return self.root / "iterations" / str(iteration) / "queue.jsonl"

    def decisions_path(self, iteration: int) -> Path:
        return self.root / "iterations" / str(iteration) / "decisions.jsonl"

    def report_path(self, iteration: int) -> Path:
        return self.root / "iterations" / str(iteration) / "report.json"

    # -- locking -----------------------------------------------------------
    @contextmanager
    def lock(self):
        self.root.mkdir(parents=True, exist_ok=True)
        lock_path = self.root / "lock"
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            pid = lock_path.read_text().strip()
            if pid.isdigit() and _pid_alive(int(pid)):
                raise WorkspaceLocked(f"workspace locked by pid {pid}") from None
            lock_path.unlink()  # stale lock from a dead process
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield self
        finally:
            lock_path.unlink(missing_ok=True)

    # -- state -------------------------------------------------------------
    def load_state(self) -> dict:
        if not self.state_path.exists():
            return {
                "pattern_version": None,
                "next_iteration": 1,
                "iterations": [],
                "rejected": [],
                "pattern_origins": {},
                "latest_model": None,
            }
        return json.loads(self.state_path.read_text(encoding="utf-8"))

    def save_state(self, state: dict) -> None:
        atomic_write_text(self.state_path, json.dumps(state, sort_keys=True, indent=2) + "\n")

    # -- corpus / patterns ---------------------------------------------------
    def load_documents(self) -> list[Document]:
        if not self.corpus_path.exists():
            raise EmptyCorpus(f"no corpus at {self.corpus_path}")
        docs = load_corpus(self.corpus_path)
        if not docs:
            raise EmptyCorpus("corpus file contains no documents")
        return docs

    def gazetteer(self) -> set[str]:
        if self.gazetteer_path.exists():
            return load_gazetteer(self.gazetteer_path)
        return set()

    def masked_corpus(self, docs: Sequence[Document]) -> dict[str, MaskedText]:
        gaz = self.gazetteer()
        return {d.id: prepare_document(d, gaz) for d in docs}

    def install_seeds(self, patterns: Sequence[Pattern]) -> PatternSet:
        pattern_set = PatternSet(list(patterns), version=0)
        save_pattern_file(pattern_set.patterns, self._prepare(self.pattern_path(0)))
        state = self.load_state()
        state["pattern_version"] = 0
        state["pattern_origins"] = {p.id: p.origin for p in pattern_set.patterns}
        self.save_state(state)
        return pattern_set

    def load_patterns(self) -> PatternSet:
        state = self.load_state()
        version = state.get("pattern_version")
        if version is None or not self.pattern_path(version).exists():
            raise NoPatterns("no pattern set installed; run seed-label first")
        origins = state.get("pattern_origins", {})
        patterns = []
        for p in load_pattern_file(self.pattern_path(version)):
            patterns.append(replace(p, origin=origins.get(p.id, "seed")))
        return PatternSet(patterns, version=version)

    def _prepare(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    # -- queues / decisions --------------------------------------------------
    def write_queue(self, iteration: int, queue: Sequence[ReviewCandidate]) -> None:
        lines = []
        for rc in queue:
            lines.append(json.dumps({
                "candidate_id": rc.candidate_id,
                "role": rc.candidate.role,
                "pattern": rc.candidate.render(),
                "frequency": rc.candidate.frequency,
                "precision_proxy": rc.precision_proxy,
                "sample_doc_ids": list(rc.candidate.sample_doc_ids),
                "snippets": [
                    {"text": s.text, "match_start": s.match_start, "match_end": s.match_end}
                    for s in rc.snippets
                ],
            }, sort_keys=True))
        atomic_write_text(self.queue_path(iteration), "".join(l + "\n" for l in lines))

    def load_queue(self, iteration: int) -> list[dict]:
        path = self.queue_path(iteration)
        if not path.exists():
            return []
        entries = []
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                entries.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad queue line: {exc.msg}", line=lineno) from exc
        return entries

    def load_decisions(self, iteration: int) -> dict[str, Decision]:
        path = self.decisions_path(iteration)
        decisions: dict[str, Decision] = {}
        if not path.exists():
            return decisions
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            decisions[obj["candidate_id"]] = Decision(
                candidate_id=obj["candidate_id"],
                verdict=obj["verdict"],
                decided_by=obj["decided_by"],
                timestamp=obj["timestamp"],
            )
        return decisions

    def append_decision(self, iteration: int, decision: Decision) -> None:
        path = self._prepare(self.decisions_path(iteration))
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({
                "candidate_id": decision.candidate_id,
                "verdict": decision.verdict,
                "decided_by": decision.decided_by,
                "timestamp": decision.timestamp,
            }, sort_keys=True) + "\n")

    # -- review operations ---------------------------------------------------
    def list_iterations(self) -> list[IterationState]:
        return [IterationState.from_json(obj) for obj in self.load_state()["iterations"]]

    def iteration_state(self, iteration: int) -> IterationState:
        for st in self.list_iterations():
            if st.iteration == iteration:
                return st
        raise StateError(f"no such iteration: {iteration}")

    def list_candidates(self, iteration: int, role: str | None = None) -> list[dict]:
        decisions = self.load_decisions(iteration)
        out = []
        for entry in self.load_queue(iteration):
            if role is not None and entry["role"] != role:
                continue
            decision = decisions.get(entry["candidate_id"])
            status = "pending"
            if decision is not None:
                status = "accepted" if decision.verdict == "accept" else "rejected"
            out.append({**entry, "status": status})
        return out

    def _find_candidate_iteration(self, candidate_id: str) -> int:
        for st in self.list_iterations():
            if any(e["candidate_id"] == candidate_id for e in self.load_queue(st.iteration)):
                return st.iteration
        raise UnknownCandidate(candidate_id)

    def record_decision(
        self, candidate_id: str, verdict: str, decided_by: str = "human"
    ) -> Decision:
        """Idempotent for a repeated verdict; a contradicting verdict errors."""
        if verdict not in ("accept", "reject"):
            raise ParseError(f"verdict must be accept or reject, got {verdict!r}")
        iteration = self._find_candidate_iteration(candidate_id)
        if self.iteration_state(iteration).status == "finalized":
            raise AlreadyFinalized(f"iteration {iteration} is finalized")
        existing = self.load_decisions(iteration).get(candidate_id)
        if existing is not None:
            if existing.verdict == verdict:
                return existing
            raise ConflictingDecision(
                f"candidate {candidate_id} already {existing.verdict}ed"
            )
        decision = Decision(candidate_id, verdict, decided_by, _utc_now())
        self.append_decision(iteration, decision)
        return decision

    def finalize(self, iteration: int) -> PatternSet:
        return apply_decisions(self, iteration)

    def _update_iteration(self, state: dict, updated: IterationState) -> None:
        records = state["iterations"]
        for i, obj in enumerate(records):
            if obj["iteration"] == updated.iteration:
                records[i] = updated.to_json()
                return
        records.append(updated.to_json())

    def _write_report(self, st: IterationState) -> None:
        atomic_write_text(
            self.report_path(st.iteration),
            json.dumps(st.to_json(), sort_keys=True, indent=2) + "\n",
        )


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def relabel_corpus(
    model: ExtractorModel,
    masked_corpus: Mapping[str, MaskedText],
    doc_order: Sequence[str],
    roles: Iterable[str],
) -> dict[str, dict[str, list[int]]]:
    """Model labels per document: entity indices per role, restricted to the
    configured roles. Non-product roles condition on the first predicted
    product; documents without one get no non-product labels."""
    roles = [r for r in ROLES if r in set(roles) and r in model.trained_roles]
    out: dict[str, dict[str, list[int]]] = {}
    for doc_id in doc_order:
        masked = masked_corpus[doc_id]
        labels: dict[str, list[int]] = {}
        condition = None
        if PRODUCT in roles:
            spans = predict(model, PRODUCT, masked)
            if spans:
                labels[PRODUCT] = [s.entity_index for s in spans if s.entity_index is not None]
                condition = spans[0].value
        for role in roles:
            if role == PRODUCT:
                continue
            if condition is None:
                continue
            spans = predict(model, role, masked, condition_product=condition)
            entity_indices = [s.entity_index for s in spans if s.entity_index is not None]
            if entity_indices:
                labels[role] = entity_indices
        out[doc_id] = labels
    return out


def rank_candidates(
    candidates: Sequence[MinedCandidate],
    model: ExtractorModel,
    masked_corpus: Mapping[str, MaskedText],
    top_k_per_role: int = 50,
    conditions: Mapping[str, str | None] | None = None,
    doc_order: Sequence[str] | None = None,
) -> list[ReviewCandidate]:
    """Attach a model-agreement precision proxy and context snippets, sort by
    (frequency, proxy), and truncate to the per-role budget."""
    order = list(doc_order) if doc_order is not None else sorted(masked_corpus)
    conditions = conditions or {}
    ranked: list[ReviewCandidate] = []
    for cand in candidates:
        pattern = cand.as_pattern(origin="candidate")
        agree = total = 0
        snippets: list[Snippet] = []
        for doc_id in order:
            masked = masked_corpus[doc_id]
            for match in match_pattern(pattern, masked):
                total += 1
                arg_pos = match.item_start + pattern.argument_offset
                item = masked.items[arg_pos]
                probe = Candidate(
                    kind=item.kind.capitalize(),
                    item_index=arg_pos,
                    value=masked.entity_value(item.entity_index),
                    entity_index=item.entity_index,
                )
                feats = featurize(probe, masked, conditions.get(doc_id))
                if model.score(cand.role, feats) >= model.tau:
                    agree += 1
                if len(snippets) < 5:
                    snippets.append(_snippet(masked, match.item_start, len(pattern.items)))
        proxy = agree / total if total else 0.0
        ranked.append(ReviewCandidate(candidate=cand, precision_proxy=proxy, snippets=snippets))

    ranked.sort(key=lambda rc: (
        -rc.candidate.frequency,
        -rc.precision_proxy,
        len(rc.candidate.items),
        rc.candidate.render(),
        rc.candidate.role,
    ))
    budget: dict[str, int] = {}
    out: list[ReviewCandidate] = []
    for rc in ranked:
        used = budget.get(rc.candidate.role, 0)
        if used < top_k_per_role:
            budget[rc.candidate.role] = used + 1
            out.append(rc)
    return out


def _item_surface(masked: MaskedText, pos: int) -> str:
    item = masked.items[pos]
    if item.kind == "word":
        return masked.tokens[item.token_index].surface
    return masked.entity_value(item.entity_index)


def _snippet(masked: MaskedText, start: int, width: int, margin: int = 3) -> Snippet:
    lo = max(0, start - margin)
    hi = min(len(masked.items), start + width + margin)
    parts = [_item_surface(masked, i) for i in range(lo, hi)]
    text = " ".join(parts)
    before = sum(len(p) + 1 for p in parts[:start - lo])
    matched = " ".join(parts[start - lo:start - lo + width])
    return Snippet(text=text, match_start=before, match_end=before + len(matched))


def auto_accept(queue: Sequence[ReviewCandidate], config: BootstrapConfig) -> list[Decision]:
    """Accept frequent candidates the model also scores as precise."""
    now = _utc_now()
    decisions = []
    for rc in queue:
        ok = (rc.candidate.frequency >= config.min_freq
              and rc.precision_proxy >= config.auto_accept_precision)
        decisions.append(Decision(
            candidate_id=rc.candidate_id,
            verdict="accept" if ok else "reject",
            decided_by="auto",
            timestamp=now,
        ))
    return decisions


def apply_decisions(workspace: Workspace, iteration: int) -> PatternSet:
    """Merge accepted candidates into a new pattern-set version; remember the
    rejected ones so they are never proposed again."""
    state = workspace.load_state()
    st = workspace.iteration_state(iteration)
    if st.status == "finalized":
        raise AlreadyFinalized(f"iteration {iteration} already finalized")
    queue = workspace.load_queue(iteration)
    decisions = workspace.load_decisions(iteration)
    pending = [e["candidate_id"] for e in queue if e["candidate_id"] not in decisions]
    if pending:
        raise PendingDecisions(pending)

    current = workspace.load_patterns()
    accepted: list[Pattern] = []
    rejected_keys = {tuple(item) for item in state.get("rejected", [])}
    n_rejected = 0
    for entry in queue:
        verdict = decisions[entry["candidate_id"]].verdict
        if verdict == "accept":
            accepted.append(
                parse_pattern(entry["role"], entry["pattern"], origin=f"enriched:{iteration}")
            )
        else:
            rejected_keys.add((entry["role"], entry["pattern"]))
            n_rejected += 1

    merged = current.merged(accepted)
    if merged.version != current.version:
        save_pattern_file(
            merged.patterns, workspace._prepare(workspace.pattern_path(merged.version))
        )

    origins = state.get("pattern_origins", {})
    for p in merged.patterns:
        origins.setdefault(p.id, p.origin)
    state["pattern_origins"] = origins
    state["pattern_version"] = merged.version
    state["rejected"] = sorted(list(k) for k in rejected_keys)
    state["next_iteration"] = max(state.get("next_iteration", 1), iteration + 1)
    st.pattern_set_version_after = merged.version
    st.counts["accepted"] = len(accepted)
    st.counts["rejected"] = n_rejected
    st.status = "finalized"
    workspace._update_iteration(state, st)
    workspace.save_state(state)
    workspace._write_report(st)
    return merged


def run_iteration(workspace: Workspace, config: BootstrapConfig) -> IterationState:
    """One pass of the four-step loop, pausing before the merge unless the
    review mode is auto."""
    docs = workspace.load_documents()
    pattern_set = workspace.load_patterns()
    if not pattern_set.patterns:
        raise NoPatterns("pattern set is empty")
    state = workspace.load_state()
    iteration = state["next_iteration"]
    for st in workspace.list_iterations():
        if st.status == "pending":
            queue = workspace.load_queue(st.iteration)
            decided = workspace.load_decisions(st.iteration)
            raise PendingDecisions(
                [e["candidate_id"] for e in queue if e["candidate_id"] not in decided]
            )

    masked = workspace.masked_corpus(docs)
    doc_order = [d.id for d in docs]

    labels = weak_label((masked[d] for d in doc_order), pattern_set)
    examples = labels_to_qa(labels, docs, config.negative_ratio, config.seed)
    model = train(examples, masked, hyper=config.hyper(), tau=config.tau)
    model_path = workspace._prepare(workspace.model_path(iteration))
    save_model(model, model_path)

    relabels = relabel_corpus(model, masked, doc_order, config.linguistic_roles)
    labeled_docs = [(masked[doc_id], relabels[doc_id]) for doc_id in doc_order]
    mined = mine_candidates(labeled_docs, config.n_min, config.n_max)
    mined = dedupe_and_filter(mined, pattern_set, config.min_freq)
    rejected_keys = {tuple(item) for item in state.get("rejected", [])}
    mined = [c for c in mined if (c.role, c.render()) not in rejected_keys]

    conditions = {
        doc_id: (masked[doc_id].entity_value(role_labels[PRODUCT][0])
                 if role_labels.get(PRODUCT) else None)
        for doc_id, role_labels in relabels.items()
    }
    queue = rank_candidates(
        mined, model, masked,
        top_k_per_role=config.top_k_per_role,
        conditions=conditions,
        doc_order=doc_order,
    )
    workspace.write_queue(iteration, queue)

    st = IterationState(
        iteration=iteration,
        pattern_set_version_before=pattern_set.version,
        pattern_set_version_after=pattern_set.version,
        counts={
            "labels": len(labels),
            "qa_examples": len(examples),
            "candidates": len(queue),
            "accepted": 0,
            "rejected": 0,
        },
        model_path=str(model_path.relative_to(workspace.root)),
        status="pending",
    )
    state = workspace.load_state()
    workspace._update_iteration(state, st)
    state["latest_model"] = st.model_path
    workspace.save_state(state)

    if config.review_mode == "auto":
        for decision in auto_accept(queue, config):
            workspace.append_decision(iteration, decision)
        apply_decisions(workspace, iteration)
        st = workspace.iteration_state(iteration)
    else:
        workspace._write_report(st)
    return st


def run_bootstrap(workspace: Workspace, config: BootstrapConfig) -> list[IterationState]:
    """Run up to config.iterations passes; interactive mode stops after the
    first pass that needs review."""
    states: list[IterationState] = []
    for _ in range(config.iterations):
        st = run_iteration(workspace, config)
        states.append(st)
        if st.status == "pending":
            break
    return states
