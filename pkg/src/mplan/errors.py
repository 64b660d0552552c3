"""Exception hierarchy shared across the package."""


class MPlanError(Exception):
    """Base class for all package errors."""


# --- persistence / data model ---

class ValidationError(MPlanError):
    """An invariant on a record or bundle was violated."""


class ParseError(MPlanError):
    """A document could not be parsed into the expected structure."""


class DecodeError(MPlanError):
    """Binary payload is not a valid image of the expected format."""


# --- pPDDL / prompting ---

class MissingSection(ParseError):
    """A required labeled section is absent from a model response."""

    def __init__(self, section: str):
        super().__init__(f"missing section: {section}")
        self.section = section


class MissingPlaceholder(MPlanError):
    """A template placeholder has no value in the substitution map."""

    def __init__(self, name: str):
        super().__init__(f"missing placeholder: {name}")
        self.name = name


class NoStepHeader(ParseError):
    """A drafting response contains no recognizable STEP header."""


# --- backends ---

class BackendError(MPlanError):
    """Base class for model-service failures."""


class Timeout(BackendError):
    """The endpoint did not answer within the configured budget."""


class AuthError(BackendError):
    """The endpoint rejected the configured credentials."""


class RateLimited(BackendError):
    """Still rate-limited after exhausting the retry budget."""


class MalformedResponse(BackendError):
    """The endpoint answered with an unusable payload."""


class UnsupportedByBackend(BackendError):
    """The endpoint cannot perform the requested operation."""


class PayloadTooLarge(BackendError):
    """Request payload exceeds the configured size limit."""


# --- engine ---

class TaskFailed(MPlanError):
    """A plan-generation task aborted at some step."""

    def __init__(self, step: int, cause: Exception | str):
        super().__init__(f"task failed at step {step}: {cause}")
        self.step = step
        self.cause = cause


# --- dataset ---

class EmptyCorpus(MPlanError):
    """No usable records were found."""


class TooFewTasks(MPlanError):
    """Not enough tasks to split at the requested ratios."""


# --- evaluation ---

class EmptyAfterTokenization(MPlanError):
    """A text contains no tokens after normalization."""


class FewerThanTwoImages(MPlanError):
    """Visual-coherence scoring needs at least two imaged steps."""


class UnevenRatings(MPlanError):
    """Agreement statistics require the same rater count per item."""


class MissingReference(MPlanError):
    """No reference plan is available for a task id."""

    def __init__(self, task_id: str):
        super().__init__(f"no reference plan for task {task_id}")
        self.task_id = task_id
