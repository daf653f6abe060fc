"""Exception types shared across pipeline stages."""


class PatchsieveError(Exception):
    """Base class for all pipeline errors."""


# --- ingest ---------------------------------------------------------------

class UnreadableFile(PatchsieveError):
    pass


class MissingClone(PatchsieveError):
    pass


class MissingCommit(PatchsieveError):
    pass


class DirtyWorkspace(PatchsieveError):
    pass


class CorruptCacheEntry(PatchsieveError):
    pass


# --- gateway / model protocol ---------------------------------------------

class UnknownTemplate(PatchsieveError):
    pass


class UnboundPlaceholder(PatchsieveError):
    def __init__(self, name: str):
        super().__init__(f"unbound placeholder: {name}")
        self.name = name


class CassetteMiss(PatchsieveError):
    def __init__(self, digest: str):
        super().__init__(f"no cassette entry for digest {digest}")
        self.digest = digest


class GatewayFailure(PatchsieveError):
    """Transport failed after the retry budget was exhausted."""


class MalformedModelOutput(PatchsieveError):
    """Model response failed the structured-output contract after repair."""


# --- classify ---------------------------------------------------------------

class EmptyPatch(PatchsieveError):
    """Record has no diff hunks and cannot be classified."""


class MixedCveInput(PatchsieveError):
    pass


# --- codeindex --------------------------------------------------------------

class NoParsableFiles(PatchsieveError):
    pass


class UnknownFile(PatchsieveError):
    pass


class UnsupportedLanguage(PatchsieveError):
    pass


class MalformedQuery(PatchsieveError):
    def __init__(self, position: int, expected: str):
        super().__init__(f"malformed query at position {position}: expected {expected}")
        self.position = position
        self.expected = expected


# --- agentloop --------------------------------------------------------------

class ToolFailure(PatchsieveError):
    def __init__(self, tool: str, cause: str):
        super().__init__(f"tool {tool} failed: {cause}")
        self.tool = tool
        self.cause = cause


# --- datasetout -------------------------------------------------------------

class DuplicateCve(PatchsieveError):
    def __init__(self, cve_id: str):
        super().__init__(f"duplicate cve_id: {cve_id}")
        self.cve_id = cve_id


class MissingClassification(PatchsieveError):
    def __init__(self, cve_id: str):
        super().__init__(f"no classification for cve_id: {cve_id}")
        self.cve_id = cve_id


class ValidationFailed(PatchsieveError):
    pass


class UnwritablePath(PatchsieveError):
    pass


# --- evalharness ------------------------------------------------------------

class MissingJudge(PatchsieveError):
    pass


# --- cli --------------------------------------------------------------------

class UsageError(PatchsieveError):
    """Bad invocation; exits with status 2."""


class StageFailure(PatchsieveError):
    """A pipeline stage reported a fatal error; exits with status 1."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage} failed: {message}")
        self.stage = stage
