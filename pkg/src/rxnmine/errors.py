"""Exception hierarchy shared across the package.

DataError covers malformed inputs (CLI exit code 3), StateError covers
operations attempted against a workspace in the wrong state (exit code 4).
"""


class RxnmineError(Exception):
    pass


class DataError(RxnmineError):
    pass


class StateError(RxnmineError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateId(DataError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"duplicate document id {doc_id!r}")


class OverlappingTags(DataError):
    pass


class NoArgumentSlot(DataError):
    pass


class MultipleArgumentSlots(DataError):
    pass


class UnknownRole(DataError):
    def __init__(self, role: str):
        self.role = role
        super().__init__(f"unknown reaction role {role!r}")


class KindMismatch(DataError):
    pass


class InvalidRange(DataError):
    pass


class MissingCondition(DataError):
    pass


class EmptyTrainingSet(DataError):
    pass


class UntrainedRole(StateError):
    def __init__(self, role: str):
        self.role = role
        super().__init__(f"no trained weights for role {role!r}")


class EmptyCorpus(StateError):
    pass


class NoPatterns(StateError):
    pass


class PendingDecisions(StateError):
    def __init__(self, candidate_ids: list[str]):
        self.candidate_ids = list(candidate_ids)
        super().__init__(
            f"{len(self.candidate_ids)} candidate(s) still pending: "
            + ", ".join(self.candidate_ids[:10])
        )


class UnknownCandidate(StateError):
    def __init__(self, candidate_id: str):
        self.candidate_id = candidate_id
        super().__init__(f"unknown candidate {candidate_id!r}")


class AlreadyFinalized(StateError):
    pass


class ConflictingDecision(StateError):
    pass


class WorkspaceLocked(StateError):
    pass
